#pragma once

// Finite-difference oracle for the joint pre-training loss. The loss is
// recomputed here from the public forward API (encode, cls_score,
// mlm_logits) rather than taken from joint_gradient, so only the forward
// pass is shared with the code under test.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <random>
#include <string>

#include "anchorpt/pretrain.hpp"

namespace oracle {

inline double log_softmax_at(const anchorpt::Matrix& logits, Eigen::Index row, int label) {
  const double m = logits.row(row).maxCoeff();
  double s = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) s += std::exp(logits(row, j) - m);
  return logits(row, label) - m - std::log(s);
}

inline double joint_loss(const anchorpt::Encoder& encoder, std::span<const anchorpt::MaskedPair> batch,
                         const anchorpt::TrainConfig& config) {
  std::array<double, anchorpt::kTaskCount> hinge_sum{};
  std::array<double, anchorpt::kTaskCount> count{};
  double nll = 0.0;
  double masked = 0.0;
  for (const auto& pair : batch) {
    const auto& p = pair.positive.sequence;
    const auto& n = pair.negative.sequence;
    const double sp = encoder.cls_score(p.token_ids, p.segment_ids);
    const double sn = encoder.cls_score(n.token_ids, n.segment_ids);
    const auto t = anchorpt::task_index(pair.task);
    hinge_sum[t] += std::max(0.0, 1.0 - sp + sn);
    count[t] += 1.0;
    if (pair.positive.labels.empty()) continue;
    std::vector<int> positions;
    for (const auto& l : pair.positive.labels) positions.push_back(l.position);
    const auto hidden = encoder.encode(p.token_ids, p.segment_ids).hidden;
    const auto logits = encoder.mlm_logits(hidden, positions);
    for (std::size_t i = 0; i < positions.size(); ++i) {
      nll -= log_softmax_at(logits, static_cast<Eigen::Index>(i), pair.positive.labels[i].original);
      masked += 1.0;
    }
  }
  double total = 0.0;
  for (std::size_t t = 0; t < anchorpt::kTaskCount; ++t) {
    if (count[t] > 0) total += config.task_weights[t] * hinge_sum[t] / count[t];
  }
  if (masked > 0) total += config.mlm_weight * nll / masked;
  return total;
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
};

// Relative error |a - n| / max(|a|, |n|, floor); the floor keeps entries
// whose true gradient is ~0 from dividing noise by noise.
inline GradCheckResult check_gradients(anchorpt::Encoder& encoder, std::span<const anchorpt::MaskedPair> batch,
                                       const anchorpt::TrainConfig& config, double eps = 1e-4,
                                       double floor = 1e-6) {
  const auto analytic = anchorpt::joint_gradient(encoder, batch, config).grads;
  GradCheckResult result;
  std::vector<std::pair<std::string, const anchorpt::Matrix*>> grads;
  analytic.for_each([&](const std::string& name, const anchorpt::Matrix& g) { grads.emplace_back(name, &g); });
  std::size_t k = 0;
  encoder.params().for_each([&](const std::string& name, anchorpt::Matrix& w) {
    const anchorpt::Matrix& g = *grads[k++].second;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      double& x = w.data()[i];
      const double saved = x;
      x = saved + eps;
      const double up = joint_loss(encoder, batch, config);
      x = saved - eps;
      const double down = joint_loss(encoder, batch, config);
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = g.data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_tensor = name + "[" + std::to_string(i) + "]";
      }
      ++result.checked;
    }
  });
  return result;
}

}  // namespace oracle

namespace oracle {

// Initialization plus N(0, spread) noise on every tensor, so that the score
// head is live and no gradient is trivially zero.
inline anchorpt::Encoder noisy_encoder(const anchorpt::EncoderConfig& config, std::uint64_t seed,
                                       double spread = 0.3) {
  auto params = anchorpt::init_parameters(config, seed);
  anchorpt::Rng rng(seed ^ 0x5eed);
  std::normal_distribution<double> noise(0.0, spread);
  params.for_each([&](const std::string&, anchorpt::Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += noise(rng);
  });
  return anchorpt::Encoder(config, std::move(params));
}

}  // namespace oracle
