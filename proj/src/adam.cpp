#include "anchorpt/adam.hpp"

#include <cmath>
#include <vector>

#include "anchorpt/error.hpp"

namespace anchorpt {
namespace {

std::vector<Matrix*> tensors(EncoderParameters& p) {
  std::vector<Matrix*> out;
  p.for_each([&out](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<const Matrix*> tensors(const EncoderParameters& p) {
  std::vector<const Matrix*> out;
  p.for_each([&out](const std::string&, const Matrix& m) { out.push_back(&m); });
  return out;
}

}  // namespace

AdamState AdamState::zeros(const EncoderConfig& config) {
  return {EncoderParameters::zeros(config), EncoderParameters::zeros(config), 0};
}

void optimizer_step(EncoderParameters& params, const Gradients& grads, AdamState& state,
                    const AdamOptions& options, double lr) {
  auto p = tensors(params);
  auto g = tensors(grads);
  auto m = tensors(state.first_moment);
  auto v = tensors(state.second_moment);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw ShapeError("optimizer tensors do not match the parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]->rows() != g[i]->rows() || p[i]->cols() != g[i]->cols()) {
      throw ShapeError("gradient shape mismatch");
    }
    auto pa = p[i]->array();
    const auto ga = g[i]->array();
    auto ma = m[i]->array();
    auto va = v[i]->array();
    ma = options.beta1 * ma + (1.0 - options.beta1) * ga;
    va = options.beta2 * va + (1.0 - options.beta2) * ga.square();
    pa -= lr * (ma / c1) / ((va / c2).sqrt() + options.eps);
  }
  round_to_storage_precision(params);
  round_to_storage_precision(state.first_moment);
  round_to_storage_precision(state.second_moment);
}

}  // namespace anchorpt
