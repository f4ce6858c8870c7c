#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "anchorpt/checkpoint.hpp"
#include "anchorpt/encoder.hpp"
#include "anchorpt/evalkit.hpp"
#include "anchorpt/pretrain.hpp"
#include "anchorpt/vocab.hpp"

namespace anchorpt {

class Qrels;

struct DocRecord {
  std::string id;
  std::string title;
  std::string url;
  std::string body;

  bool operator==(const DocRecord&) const = default;
};

/// Tokens of title, url and body in that order. Throws when all are empty.
std::vector<std::string> document_text(const DocRecord& doc);

/// Document collection keyed by id. JSONL records {id, title, url, body}.
class DocCollection {
 public:
  void add(DocRecord doc);
  const DocRecord& at(const std::string& id) const;
  bool contains(const std::string& id) const { return docs_.contains(id); }
  std::size_t size() const { return docs_.size(); }
  const std::map<std::string, DocRecord>& records() const { return docs_; }

 private:
  std::map<std::string, DocRecord> docs_;
};

DocCollection read_docs(std::istream& in, const std::string& source = "<docs>");
DocCollection load_docs(const std::string& path);
void write_docs(const DocCollection& docs, std::ostream& out);

/// "qid<TAB>query text" per line.
using QuerySet = std::map<std::string, std::string>;
QuerySet read_queries(std::istream& in, const std::string& source = "<queries>");
QuerySet load_queries(const std::string& path);
void write_queries(const QuerySet& queries, std::ostream& out);

struct Candidate {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const Candidate&) const = default;
};

/// Query id -> first-stage candidates in retrieval order. File lines are
/// "qid docid rank score"; duplicate documents per query are rejected.
using CandidateLists = std::map<std::string, std::vector<Candidate>>;
CandidateLists read_candidates(std::istream& in, const std::string& source = "<candidates>");
CandidateLists load_candidates(const std::string& path);
void write_candidates(const CandidateLists& lists, std::ostream& out);

struct RankingExample {
  std::string qid;
  std::string query;
  std::string doc_id;
  int label = 0;
};

/// One example per candidate of each judged query; label = grade >= 1.
std::vector<RankingExample> ranking_examples(const QuerySet& queries, const CandidateLists& candidates,
                                             const Qrels& qrels);

/// Cross-encoder over [CLS] query [SEP] document [SEP].
class Ranker {
 public:
  Ranker(Encoder encoder, Vocabulary vocab);
  static Ranker from_checkpoint(const Checkpoint& checkpoint);

  const Encoder& encoder() const { return encoder_; }
  Encoder& encoder() { return encoder_; }
  const Vocabulary& vocab() const { return vocab_; }

  PackedSequence pack(std::string_view query, const DocRecord& doc) const;
  /// Raw [CLS] score.
  double logit(std::string_view query, const DocRecord& doc) const;
  /// Logistic of the raw score, in (0, 1).
  double score(std::string_view query, const DocRecord& doc) const;

 private:
  Encoder encoder_;
  Vocabulary vocab_;
};

double sigmoid(double x);

/// Binary cross-entropy of the logistic of `logit` against a 0/1 label,
/// computed without forming log(0).
double bce_with_logit(double logit, int label);

struct FinetuneConfig {
  double lr = 1e-5;
  int epochs = 2;
  double warmup = 0.1;  // fraction of steps with linear warmup
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;  // 0 = no limit beyond epochs
  bool reset_head = false;    // reinitialize the score head before training
  bool pairwise = false;      // hinge over (relevant, irrelevant) pairs of a query instead of BCE

  void validate() const;
};

/// Learning rate of (0-based) `step` out of `total_steps`.
double warmup_lr(std::size_t step, std::size_t total_steps, double warmup, double lr);

struct FinetuneReport {
  std::size_t steps = 0;
  std::vector<double> step_losses;  // mean loss of each batch before its update
};

/// Pointwise cross-entropy fine-tuning, or with config.pairwise a hinge
/// loss over every (relevant, irrelevant) pair of the same query. Throws on
/// labels other than 0/1.
FinetuneReport finetune(Ranker& ranker, std::span<const RankingExample> examples, const DocCollection& docs,
                        const FinetuneConfig& config);

/// Candidates sorted by descending score, ties kept in input order, cut at k.
std::vector<RunEntry> rerank(const Ranker& ranker, std::string_view query, std::span<const Candidate> candidates,
                             const DocCollection& docs, std::size_t k);

/// Same ordering rule applied to precomputed scores.
std::vector<std::size_t> rank_order(std::span<const double> scores, std::size_t k);

}  // namespace anchorpt
