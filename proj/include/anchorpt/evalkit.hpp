#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace anchorpt {

struct RunEntry {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const RunEntry&) const = default;
};

/// Query id -> documents in rank order (rank = index + 1).
struct RankedRun {
  std::map<std::string, std::vector<RunEntry>> queries;
  std::string tag = "anchorpt";

  bool operator==(const RankedRun&) const = default;
};

/// (query id, doc id) -> grade. Missing pairs read as grade 0.
class Qrels {
 public:
  void set(const std::string& qid, const std::string& doc_id, int grade);
  int grade(const std::string& qid, const std::string& doc_id) const;
  bool has_query(const std::string& qid) const { return grades_.contains(qid); }
  /// All judged grades of a query, unordered.
  std::vector<int> grades(const std::string& qid) const;
  const std::map<std::string, std::map<std::string, int>>& data() const { return grades_; }

 private:
  std::map<std::string, std::map<std::string, int>> grades_;
};

/// "qid Q0 docid rank score tag". Ranks must be contiguous from 1 within a
/// query and documents unique. Throws ParseError with the line number.
RankedRun read_run(std::istream& in, const std::string& source = "<run>");
RankedRun load_run(const std::string& path);
/// Scores are written with 6 decimals.
void write_run(const RankedRun& run, std::ostream& out);

/// "qid 0 docid grade".
Qrels read_qrels(std::istream& in, const std::string& source = "<qrels>");
Qrels load_qrels(const std::string& path);
void write_qrels(const Qrels& qrels, std::ostream& out);

struct MetricDetail {
  double value = 0.0;
  std::vector<std::string> unjudged_queries;  // in the run but not in qrels
};

/// Mean over run queries of 1/rank of the first document with grade >= 1
/// in the top k. Throws on an empty run or k == 0.
MetricDetail mrr_at_k(const RankedRun& run, const Qrels& qrels, std::size_t k);

/// DCG with gain 2^g - 1 and discount 1/log2(rank + 1), normalized by the
/// ideal DCG of the query's judged grades. Queries without any positive
/// grade contribute 0.
MetricDetail ndcg_at_k(const RankedRun& run, const Qrels& qrels, std::size_t k);

}  // namespace anchorpt
