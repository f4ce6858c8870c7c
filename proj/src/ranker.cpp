#include "anchorpt/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "anchorpt/error.hpp"
#include "anchorpt/evalkit.hpp"
#include "anchorpt/pretrain.hpp"
#include "anchorpt/text.hpp"

namespace anchorpt {
namespace {

std::ifstream open_input(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw Error(std::string("cannot open ") + what + " '" + path + "'");
  return in;
}

bool blank(const std::string& line) { return std::all_of(line.begin(), line.end(), is_ascii_space); }

}  // namespace

std::vector<std::string> document_text(const DocRecord& doc) {
  std::vector<std::string> tokens = tokenize(doc.title);
  for (const auto* field : {&doc.url, &doc.body}) {
    auto more = tokenize(*field);
    tokens.insert(tokens.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  if (tokens.empty()) throw Error("document '" + doc.id + "' has no text in title, url or body");
  return tokens;
}

void DocCollection::add(DocRecord doc) {
  if (doc.id.empty()) throw Error("document without id");
  const std::string id = doc.id;
  if (!docs_.emplace(id, std::move(doc)).second) throw Error("duplicate document id '" + id + "'");
}

const DocRecord& DocCollection::at(const std::string& id) const {
  auto it = docs_.find(id);
  if (it == docs_.end()) throw Error("unknown document '" + id + "'");
  return it->second;
}

DocCollection read_docs(std::istream& in, const std::string& source) {
  DocCollection docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      docs.add({j.at("id").get<std::string>(), j.value("title", std::string{}), j.value("url", std::string{}),
                j.value("body", std::string{})});
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return docs;
}

DocCollection load_docs(const std::string& path) {
  auto in = open_input(path, "document collection");
  return read_docs(in, path);
}

void write_docs(const DocCollection& docs, std::ostream& out) {
  for (const auto& [id, d] : docs.records()) {
    nlohmann::ordered_json j;
    j["id"] = d.id;
    j["title"] = d.title;
    j["url"] = d.url;
    j["body"] = d.body;
    out << j.dump() << '\n';
  }
}

QuerySet read_queries(std::istream& in, const std::string& source) {
  QuerySet queries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError(source, line_no, "expected 'qid<TAB>query'");
    if (!queries.emplace(line.substr(0, tab), line.substr(tab + 1)).second) {
      throw ParseError(source, line_no, "duplicate query id '" + line.substr(0, tab) + "'");
    }
  }
  return queries;
}

QuerySet load_queries(const std::string& path) {
  auto in = open_input(path, "query file");
  return read_queries(in, path);
}

void write_queries(const QuerySet& queries, std::ostream& out) {
  for (const auto& [qid, text] : queries) out << qid << '\t' << text << '\n';
}

CandidateLists read_candidates(std::istream& in, const std::string& source) {
  CandidateLists lists;
  std::map<std::string, std::set<std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    std::istringstream fields(line);
    std::string qid, doc, extra;
    long rank = 0;
    double score = 0.0;
    if (!(fields >> qid >> doc >> rank >> score) || (fields >> extra)) {
      throw ParseError(source, line_no, "expected 'qid docid rank score'");
    }
    auto& list = lists[qid];
    if (rank != static_cast<long>(list.size()) + 1) {
      throw ParseError(source, line_no, "rank " + std::to_string(rank) + " for query '" + qid + "' is not contiguous");
    }
    if (!seen[qid].insert(doc).second) {
      throw ParseError(source, line_no, "duplicate candidate '" + doc + "' for query '" + qid + "'");
    }
    list.push_back({doc, score});
  }
  return lists;
}

CandidateLists load_candidates(const std::string& path) {
  auto in = open_input(path, "candidate file");
  return read_candidates(in, path);
}

void write_candidates(const CandidateLists& lists, std::ostream& out) {
  for (const auto& [qid, list] : lists) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      out << qid << ' ' << list[i].doc_id << ' ' << i + 1 << ' ' << list[i].score << '\n';
    }
  }
}

std::vector<RankingExample> ranking_examples(const QuerySet& queries, const CandidateLists& candidates,
                                             const Qrels& qrels) {
  std::vector<RankingExample> out;
  for (const auto& [qid, list] : candidates) {
    if (!qrels.has_query(qid)) continue;
    auto q = queries.find(qid);
    if (q == queries.end()) throw Error("candidates reference unknown query '" + qid + "'");
    for (const auto& c : list) out.push_back({qid, q->second, c.doc_id, qrels.grade(qid, c.doc_id) >= 1 ? 1 : 0});
  }
  return out;
}

Ranker::Ranker(Encoder encoder, Vocabulary vocab) : encoder_(std::move(encoder)), vocab_(std::move(vocab)) {
  if (vocab_.size() != static_cast<std::size_t>(encoder_.config().vocab_size)) {
    throw ShapeError("vocabulary size does not match the encoder");
  }
}

Ranker Ranker::from_checkpoint(const Checkpoint& checkpoint) {
  return Ranker(Encoder(checkpoint.config, checkpoint.params), checkpoint.vocab);
}

PackedSequence Ranker::pack(std::string_view query, const DocRecord& doc) const {
  return pack_input(vocab_.encode(tokenize(query)), vocab_.encode(document_text(doc)),
                    static_cast<std::size_t>(encoder_.config().max_len));
}

double Ranker::logit(std::string_view query, const DocRecord& doc) const {
  const auto seq = pack(query, doc);
  return encoder_.cls_score(seq.token_ids, seq.segment_ids);
}

double Ranker::score(std::string_view query, const DocRecord& doc) const { return sigmoid(logit(query, doc)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bce_with_logit(double logit, int label) {
  // -[y log s + (1-y) log(1-s)] = softplus(z) - y z
  const double softplus = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
  return softplus - static_cast<double>(label) * logit;
}

void FinetuneConfig::validate() const {
  if (!(lr > 0.0)) throw Error("learning rate must be positive");
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (!(warmup >= 0.0 && warmup <= 1.0)) throw Error("warmup fraction must lie in [0, 1]");
  if (batch_size == 0) throw Error("batch size must be positive");
}

double warmup_lr(std::size_t step, std::size_t total_steps, double warmup, double lr) {
  const auto warm = static_cast<std::size_t>(std::ceil(warmup * static_cast<double>(total_steps)));
  if (step >= warm) return lr;
  return lr * static_cast<double>(step + 1) / static_cast<double>(warm);
}

FinetuneReport finetune(Ranker& ranker, std::span<const RankingExample> examples, const DocCollection& docs,
                        const FinetuneConfig& config) {
  config.validate();
  for (const auto& e : examples) {
    if (e.label != 0 && e.label != 1) {
      throw Error("label " + std::to_string(e.label) + " for (" + e.qid + ", " + e.doc_id + ") is not binary");
    }
  }
  Encoder& encoder = ranker.encoder();
  if (config.reset_head) {
    const auto fresh = init_parameters(encoder.config(), derive_seed(config.seed, "finetune/head"));
    auto& p = encoder.params();
    p.cls_hidden = fresh.cls_hidden;
    p.cls_hidden_bias = fresh.cls_hidden_bias;
    p.cls_output = fresh.cls_output;
    p.cls_output_bias = fresh.cls_output_bias;
  }

  std::vector<PackedSequence> packed;
  packed.reserve(examples.size());
  for (const auto& e : examples) packed.push_back(ranker.pack(e.query, docs.at(e.doc_id)));

  // A training unit is one example (pointwise) or one (relevant,
  // irrelevant) index pair of a query (pairwise).
  std::vector<std::pair<std::size_t, std::size_t>> units;
  if (config.pairwise) {
    std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_query;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      auto& [pos, neg] = by_query[examples[i].qid];
      (examples[i].label == 1 ? pos : neg).push_back(i);
    }
    for (const auto& [qid, split] : by_query) {
      for (std::size_t p : split.first) {
        for (std::size_t n : split.second) units.emplace_back(p, n);
      }
    }
  } else {
    for (std::size_t i = 0; i < examples.size(); ++i) units.emplace_back(i, i);
  }

  FinetuneReport report;
  if (units.empty()) return report;
  const std::size_t per_epoch = (units.size() + config.batch_size - 1) / config.batch_size;
  std::size_t total = per_epoch * static_cast<std::size_t>(config.epochs);
  if (config.max_steps != 0) total = std::min(total, config.max_steps);

  AdamState state = AdamState::zeros(encoder.config());
  Rng dropout_rng = child_rng(config.seed, "finetune/dropout");
  Rng* dropout = encoder.config().dropout > 0.0 ? &dropout_rng : nullptr;
  std::vector<std::size_t> order(units.size());
  for (int epoch = 0; epoch < config.epochs && report.steps < total; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = child_rng(config.seed, "finetune/epoch/" + std::to_string(epoch));
    std::shuffle(order.begin(), order.end(), shuffle);
    for (std::size_t start = 0; start < order.size() && report.steps < total; start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      Gradients grads = EncoderParameters::zeros(encoder.config());
      double loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto [a, b] = units[order[k]];
        const auto& seq = packed[a];
        const ForwardTrace trace = encoder.forward(seq.token_ids, seq.segment_ids, dropout);
        if (!config.pairwise) {
          const int y = examples[a].label;
          loss += bce_with_logit(trace.score, y) * inv;
          SequenceGradient g;
          g.d_score = (sigmoid(trace.score) - static_cast<double>(y)) * inv;
          encoder.backward(trace, g, grads);
          continue;
        }
        const auto& other = packed[b];
        const ForwardTrace neg = encoder.forward(other.token_ids, other.segment_ids, dropout);
        const double h = hinge_loss(trace.score, neg.score);
        loss += h * inv;
        if (h > 0.0) {
          SequenceGradient gp, gn;
          gp.d_score = -inv;
          gn.d_score = inv;
          encoder.backward(trace, gp, grads);
          encoder.backward(neg, gn, grads);
        }
      }
      if (!std::isfinite(loss)) throw Error("non-finite fine-tuning loss at step " + std::to_string(report.steps + 1));
      optimizer_step(encoder.params(), grads, state, AdamOptions{}, warmup_lr(report.steps, total, config.warmup, config.lr));
      report.step_losses.push_back(loss);
      ++report.steps;
    }
  }
  return report;
}

std::vector<std::size_t> rank_order(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (order.size() > k) order.resize(k);
  return order;
}

std::vector<RunEntry> rerank(const Ranker& ranker, std::string_view query, std::span<const Candidate> candidates,
                             const DocCollection& docs, std::size_t k) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(ranker.score(query, docs.at(c.doc_id)));
  std::vector<RunEntry> out;
  for (std::size_t i : rank_order(scores, k)) out.push_back({candidates[i].doc_id, scores[i]});
  return out;
}

}  // namespace anchorpt
