#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "anchorpt/adam.hpp"
#include "anchorpt/encoder.hpp"
#include "anchorpt/rng.hpp"
#include "anchorpt/taskgen.hpp"

namespace anchorpt {

class HyperlinkCorpus;
class Vocabulary;

/// [CLS] query [SEP] document [SEP]. Segment 0 covers [CLS], the query and
/// the first [SEP]; segment 1 the rest. No padding is ever stored, so the
/// attention mask is all ones and not materialized.
struct PackedSequence {
  std::vector<int> token_ids;
  std::vector<int> segment_ids;
  std::size_t query_length = 0;
  std::size_t doc_length = 0;

  std::size_t size() const { return token_ids.size(); }
  bool operator==(const PackedSequence&) const = default;
};

/// Truncates the document from the tail to fit max_len. Throws when the
/// query is empty or longer than max_len - 3.
PackedSequence pack_input(std::span<const int> query_ids, std::span<const int> doc_ids,
                          std::size_t max_len);

/// Query terms to ids. Multi-word anchor surfaces are split into their words.
std::vector<int> query_token_ids(const Vocabulary& vocab, std::span<const std::string> query);

enum class MaskAction { kMask, kRandom, kKeep };

struct MaskLabel {
  int position = 0;
  int original = 0;
  MaskAction action = MaskAction::kMask;

  bool operator==(const MaskLabel&) const = default;
};

struct MaskedSequence {
  PackedSequence sequence;  // with replacements applied
  std::vector<MaskLabel> labels;  // ascending position
};

/// Selects round(rate * maskable) non-special positions (at least one when
/// any exist). Each is replaced by [MASK] with probability 0.8, by a random
/// non-special id with 0.1 and left unchanged with 0.1.
MaskedSequence mask_tokens(const PackedSequence& seq, int vocab_size, Rng& rng, double rate = 0.15);

/// Original ids, recovered from the labels.
std::vector<int> unmask(const MaskedSequence& masked);

/// max(0, 1 - pos + neg).
double hinge_loss(double pos, double neg);

/// Mean negative log-likelihood of `labels` under row-wise softmax of
/// `logits`. Zero when there are no rows.
double mlm_loss(const Matrix& logits, std::span<const int> labels);

/// d mlm_loss / d logits scaled by `scale`; for a pooled mean over M
/// positions pass scale = weight / M.
Matrix mlm_loss_gradient(const Matrix& logits, std::span<const int> labels, double scale);

struct TrainConfig {
  double lr = 1e-4;
  int epochs = 10;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  std::array<double, kTaskCount> task_weights{1.0, 1.0, 1.0, 1.0};
  double mlm_weight = 1.0;
  double mask_rate = 0.15;
  std::size_t max_steps = 0;  // 0 = no limit beyond epochs
  std::size_t log_every = 50;

  void validate() const;
};

/// Page id -> summary ids (the destination-page text used in every packing).
class DocumentStore {
 public:
  DocumentStore() = default;
  DocumentStore(const HyperlinkCorpus& corpus, const Vocabulary& vocab, std::size_t summary_tokens);

  const std::vector<int>& at(const std::string& page_id) const;
  std::size_t size() const { return docs_.size(); }

 private:
  std::map<std::string, std::vector<int>, std::less<>> docs_;
};

struct PreparedPair {
  Task task = Task::kRqp;
  PackedSequence positive;
  PackedSequence negative;
};

std::vector<PreparedPair> prepare_pairs(std::span<const PretrainPair> pairs, const DocumentStore& docs,
                                        const Vocabulary& vocab, std::size_t max_len);

struct StepStats {
  std::size_t step = 0;
  std::array<std::size_t, kTaskCount> task_pairs{};
  std::array<double, kTaskCount> task_hinge{};         // mean hinge per task
  std::array<double, kTaskCount> task_contribution{};  // weight * mean hinge
  std::size_t masked_positions = 0;
  double mlm = 0.0;               // mean NLL over all masked positions
  double mlm_contribution = 0.0;  // mlm_weight * mlm
  double total = 0.0;
};

struct MaskedPair {
  Task task = Task::kRqp;
  MaskedSequence positive;
  MaskedSequence negative;
};

/// Masks both packings of every pair (no-op masks when mlm_weight is 0).
/// Both are masked so the masking itself carries no label signal.
std::vector<MaskedPair> mask_batch(std::span<const PreparedPair> batch, int vocab_size,
                                   const TrainConfig& config, Rng& rng);

struct JointGradient {
  StepStats stats;
  Gradients grads;
  bool has_gradient = false;  // false when no term contributes
};

/// Joint loss and its exact gradient: per-task mean hinge times its weight,
/// plus the weighted MLM mean NLL pooled over the positive packings.
JointGradient joint_gradient(const Encoder& encoder, std::span<const MaskedPair> batch,
                             const TrainConfig& config, Rng* dropout_rng = nullptr);

/// mask_batch, joint_gradient and one optimizer step. The optimizer is not
/// stepped (the step counter still advances) when no term contributes a
/// gradient. Throws on a non-finite loss.
StepStats joint_step(Encoder& encoder, AdamState& state, std::span<const PreparedPair> batch,
                     const TrainConfig& config, Rng& rng);

struct TrainReport {
  std::size_t steps = 0;
  std::vector<StepStats> log;  // every log_every steps plus the last step
  std::vector<double> step_losses;
};

using StepCallback = std::function<void(const StepStats&)>;

/// Epochs of shuffled mini-batches. Deterministic for a fixed seed.
TrainReport train(Encoder& encoder, AdamState& state, std::span<const PreparedPair> pairs,
                  const TrainConfig& config, const StepCallback& on_log = {});

/// Fraction of pairs with score(positive) > score(negative), unmasked and
/// without dropout.
double pairwise_accuracy(const Encoder& encoder, std::span<const PreparedPair> pairs);

}  // namespace anchorpt
