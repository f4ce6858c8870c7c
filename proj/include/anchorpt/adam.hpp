#pragma once

#include <cstdint>

#include "anchorpt/encoder.hpp"

namespace anchorpt {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates plus the step counter.
struct AdamState {
  EncoderParameters first_moment;
  EncoderParameters second_moment;
  std::int64_t step = 0;

  static AdamState zeros(const EncoderConfig& config);
};

/// One bias-corrected adaptive-moment update. `lr` overrides options.lr so
/// schedules can drive it. Parameters and moments are rounded to float32
/// storage precision afterwards.
void optimizer_step(EncoderParameters& params, const Gradients& grads, AdamState& state,
                    const AdamOptions& options, double lr);

inline void optimizer_step(EncoderParameters& params, const Gradients& grads, AdamState& state,
                           const AdamOptions& options) {
  optimizer_step(params, grads, state, options, options.lr);
}

}  // namespace anchorpt
