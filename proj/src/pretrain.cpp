#include "anchorpt/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "anchorpt/corpus.hpp"
#include "anchorpt/error.hpp"
#include "anchorpt/text.hpp"
#include "anchorpt/vocab.hpp"

namespace anchorpt {

PackedSequence pack_input(std::span<const int> query_ids, std::span<const int> doc_ids,
                          std::size_t max_len) {
  if (query_ids.empty()) throw Error("cannot pack an empty query");
  if (max_len < 3 || query_ids.size() > max_len - 3) {
    throw Error("query of " + std::to_string(query_ids.size()) + " tokens does not fit max_len " +
                std::to_string(max_len));
  }
  const std::size_t doc_len = std::min(doc_ids.size(), max_len - 3 - query_ids.size());
  PackedSequence seq;
  seq.query_length = query_ids.size();
  seq.doc_length = doc_len;
  seq.token_ids.reserve(query_ids.size() + doc_len + 3);
  seq.token_ids.push_back(Vocabulary::kCls);
  seq.token_ids.insert(seq.token_ids.end(), query_ids.begin(), query_ids.end());
  seq.token_ids.push_back(Vocabulary::kSep);
  seq.segment_ids.assign(seq.token_ids.size(), 0);
  seq.token_ids.insert(seq.token_ids.end(), doc_ids.begin(), doc_ids.begin() + static_cast<std::ptrdiff_t>(doc_len));
  seq.token_ids.push_back(Vocabulary::kSep);
  seq.segment_ids.resize(seq.token_ids.size(), 1);
  return seq;
}

std::vector<int> query_token_ids(const Vocabulary& vocab, std::span<const std::string> query) {
  std::vector<int> ids;
  for (const auto& term : query) {
    for (const auto& word : tokenize(term)) ids.push_back(vocab.id(word));
  }
  return ids;
}

MaskedSequence mask_tokens(const PackedSequence& seq, int vocab_size, Rng& rng, double rate) {
  std::vector<int> maskable;
  for (std::size_t i = 0; i < seq.token_ids.size(); ++i) {
    if (!Vocabulary::is_special(seq.token_ids[i])) maskable.push_back(static_cast<int>(i));
  }
  MaskedSequence out{seq, {}};
  if (maskable.empty()) return out;
  auto count = static_cast<std::size_t>(std::lround(rate * static_cast<double>(maskable.size())));
  count = std::clamp<std::size_t>(count, 1, maskable.size());

  // Partial Fisher-Yates: the first `count` entries become the selection.
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(maskable[i], maskable[i + uniform_index(rng, maskable.size() - i)]);
  }
  maskable.resize(count);
  std::sort(maskable.begin(), maskable.end());

  const int regular = vocab_size - Vocabulary::kNumSpecial;
  for (int pos : maskable) {
    auto& id = out.sequence.token_ids[static_cast<std::size_t>(pos)];
    MaskLabel label{pos, id, MaskAction::kKeep};
    const double u = uniform01(rng);
    if (u < 0.8) {
      label.action = MaskAction::kMask;
      id = Vocabulary::kMask;
    } else if (u < 0.9) {
      label.action = MaskAction::kRandom;
      if (regular > 0) {
        id = Vocabulary::kNumSpecial + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(regular)));
      }
    }
    out.labels.push_back(label);
  }
  return out;
}

std::vector<int> unmask(const MaskedSequence& masked) {
  auto ids = masked.sequence.token_ids;
  for (const auto& l : masked.labels) ids[static_cast<std::size_t>(l.position)] = l.original;
  return ids;
}

double hinge_loss(double pos, double neg) { return std::max(0.0, 1.0 - pos + neg); }

double mlm_loss(const Matrix& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw ShapeError("MLM labels and logits differ in count");
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    total += lse - logits(r, labels[static_cast<std::size_t>(r)]);
  }
  return total / static_cast<double>(labels.size());
}

Matrix mlm_loss_gradient(const Matrix& logits, std::span<const int> labels, double scale) {
  Matrix grad = softmax_rows(logits);
  for (Eigen::Index r = 0; r < grad.rows(); ++r) grad(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
  return grad * scale;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw Error("learning rate must be positive");
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (batch_size == 0) throw Error("batch size must be positive");
  for (double w : task_weights) {
    if (!(w >= 0.0)) throw Error("task weights must be non-negative");
  }
  if (!(mlm_weight >= 0.0)) throw Error("MLM weight must be non-negative");
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw Error("mask rate must lie in (0, 1)");
  if (log_every == 0) throw Error("log_every must be positive");
}

DocumentStore::DocumentStore(const HyperlinkCorpus& corpus, const Vocabulary& vocab,
                             std::size_t summary_tokens) {
  for (const auto& page : corpus.pages()) docs_.emplace(page.id, vocab.encode(page_summary(page, summary_tokens)));
}

const std::vector<int>& DocumentStore::at(const std::string& page_id) const {
  auto it = docs_.find(page_id);
  if (it == docs_.end()) throw Error("unknown document '" + page_id + "'");
  return it->second;
}

std::vector<PreparedPair> prepare_pairs(std::span<const PretrainPair> pairs, const DocumentStore& docs,
                                        const Vocabulary& vocab, std::size_t max_len) {
  std::vector<PreparedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    PreparedPair prepared;
    prepared.task = p.task;
    const auto query = query_token_ids(vocab, p.query);
    if (p.task == Task::kRqp) {
      const auto& doc = docs.at(p.pos_doc_id);
      prepared.positive = pack_input(query, doc, max_len);
      prepared.negative = pack_input(query_token_ids(vocab, p.neg_query), doc, max_len);
    } else {
      prepared.positive = pack_input(query, docs.at(p.pos_doc_id), max_len);
      prepared.negative = pack_input(query, docs.at(p.neg_doc_id), max_len);
    }
    out.push_back(std::move(prepared));
  }
  return out;
}

std::vector<MaskedPair> mask_batch(std::span<const PreparedPair> batch, int vocab_size,
                                   const TrainConfig& config, Rng& rng) {
  std::vector<MaskedPair> out;
  out.reserve(batch.size());
  for (const auto& pair : batch) {
    if (config.mlm_weight > 0.0) {
      auto p = mask_tokens(pair.positive, vocab_size, rng, config.mask_rate);
      auto n = mask_tokens(pair.negative, vocab_size, rng, config.mask_rate);
      out.push_back({pair.task, std::move(p), std::move(n)});
    } else {
      out.push_back({pair.task, {pair.positive, {}}, {pair.negative, {}}});
    }
  }
  return out;
}

JointGradient joint_gradient(const Encoder& encoder, std::span<const MaskedPair> batch,
                             const TrainConfig& config, Rng* dropout_rng) {
  JointGradient result{{}, EncoderParameters::zeros(encoder.config()), false};
  StepStats& stats = result.stats;
  for (const auto& pair : batch) {
    ++stats.task_pairs[task_index(pair.task)];
    stats.masked_positions += pair.positive.labels.size();
  }
  double mlm_sum = 0.0;
  const double mlm_scale =
      stats.masked_positions > 0 ? config.mlm_weight / static_cast<double>(stats.masked_positions) : 0.0;
  Rng* dropout = encoder.config().dropout > 0.0 ? dropout_rng : nullptr;

  for (const auto& pair : batch) {
    const std::size_t t = task_index(pair.task);
    const double weight = config.task_weights[t] / static_cast<double>(stats.task_pairs[t]);

    const auto& ps = pair.positive.sequence;
    const auto& ns = pair.negative.sequence;
    const ForwardTrace tp = encoder.forward(ps.token_ids, ps.segment_ids, dropout);
    const ForwardTrace tn = encoder.forward(ns.token_ids, ns.segment_ids, dropout);
    const double h = hinge_loss(tp.score, tn.score);
    stats.task_hinge[t] += h;

    SequenceGradient gp, gn;
    if (h > 0.0 && weight > 0.0) {
      gp.d_score = -weight;
      gn.d_score = weight;
    }
    if (!pair.positive.labels.empty()) {
      std::vector<int> labels;
      for (const auto& l : pair.positive.labels) {
        gp.mlm_positions.push_back(l.position);
        labels.push_back(l.original);
      }
      const Matrix logits = encoder.mlm_logits(tp.hidden, gp.mlm_positions);
      mlm_sum += mlm_loss(logits, labels) * static_cast<double>(labels.size());
      gp.d_mlm_logits = mlm_loss_gradient(logits, labels, mlm_scale);
    }
    if (gp.d_score != 0.0 || (mlm_scale > 0.0 && !gp.mlm_positions.empty())) {
      encoder.backward(tp, gp, result.grads);
      result.has_gradient = true;
    }
    if (gn.d_score != 0.0) encoder.backward(tn, gn, result.grads);
  }

  for (std::size_t t = 0; t < kTaskCount; ++t) {
    if (stats.task_pairs[t] == 0) continue;
    stats.task_hinge[t] /= static_cast<double>(stats.task_pairs[t]);
    stats.task_contribution[t] = config.task_weights[t] * stats.task_hinge[t];
    stats.total += stats.task_contribution[t];
  }
  if (stats.masked_positions > 0) {
    stats.mlm = mlm_sum / static_cast<double>(stats.masked_positions);
    stats.mlm_contribution = config.mlm_weight * stats.mlm;
    stats.total += stats.mlm_contribution;
  }
  return result;
}

StepStats joint_step(Encoder& encoder, AdamState& state, std::span<const PreparedPair> batch,
                     const TrainConfig& config, Rng& rng) {
  if (batch.empty()) {
    StepStats empty;
    empty.step = static_cast<std::size_t>(state.step) + 1;
    return empty;
  }
  const auto masked = mask_batch(batch, encoder.config().vocab_size, config, rng);
  JointGradient g = joint_gradient(encoder, masked, config, &rng);
  g.stats.step = static_cast<std::size_t>(state.step) + 1;
  if (!std::isfinite(g.stats.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << g.stats.step << ":";
    for (Task task : kAllTasks) msg << ' ' << task_name(task) << '=' << g.stats.task_hinge[task_index(task)];
    msg << " MLM=" << g.stats.mlm;
    throw Error(msg.str());
  }
  if (g.has_gradient) {
    optimizer_step(encoder.params(), g.grads, state, AdamOptions{}, config.lr);
  } else {
    ++state.step;
  }
  return g.stats;
}

TrainReport train(Encoder& encoder, AdamState& state, std::span<const PreparedPair> pairs,
                  const TrainConfig& config, const StepCallback& on_log) {
  config.validate();
  TrainReport report;
  if (pairs.empty()) return report;
  std::vector<std::size_t> order(pairs.size());
  std::vector<PreparedPair> batch;
  bool done = false;
  for (int epoch = 0; epoch < config.epochs && !done; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = child_rng(config.seed, "epoch/" + std::to_string(epoch));
    std::shuffle(order.begin(), order.end(), shuffle);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(pairs[order[k]]);
      Rng step_rng = child_rng(config.seed, "step/" + std::to_string(report.steps));
      StepStats stats = joint_step(encoder, state, batch, config, step_rng);
      stats.step = ++report.steps;
      report.step_losses.push_back(stats.total);
      const bool last_step = config.max_steps != 0 && report.steps >= config.max_steps;
      const bool last_batch = epoch + 1 == config.epochs && end == order.size();
      if (report.steps % config.log_every == 0 || report.steps == 1 || last_step || last_batch) {
        report.log.push_back(stats);
        if (on_log) on_log(stats);
      }
      if (last_step) {
        done = true;
        break;
      }
    }
  }
  return report;
}

double pairwise_accuracy(const Encoder& encoder, std::span<const PreparedPair> pairs) {
  if (pairs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const double sp = encoder.cls_score(p.positive.token_ids, p.positive.segment_ids);
    const double sn = encoder.cls_score(p.negative.token_ids, p.negative.segment_ids);
    if (sp > sn) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

}  // namespace anchorpt
