#include "anchorpt/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "anchorpt/error.hpp"

namespace anchorpt {
namespace {

std::vector<std::string> fields_of(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string f; in >> f;) out.push_back(std::move(f));
  return out;
}

long parse_int(const std::string& s, const char* what) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(std::string("bad ") + what + " '" + s + "'");
  return v;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !std::isfinite(v)) throw Error("bad score '" + s + "'");
  return v;
}

template <class F>
void for_each_line(std::istream& in, const std::string& source, F&& f) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = fields_of(line);
    if (fields.empty()) continue;
    try {
      f(fields);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
}

}  // namespace

void Qrels::set(const std::string& qid, const std::string& doc_id, int grade) {
  if (grade < 0) throw Error("negative relevance grade");
  grades_[qid][doc_id] = grade;
}

int Qrels::grade(const std::string& qid, const std::string& doc_id) const {
  auto q = grades_.find(qid);
  if (q == grades_.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

std::vector<int> Qrels::grades(const std::string& qid) const {
  std::vector<int> out;
  auto q = grades_.find(qid);
  if (q != grades_.end()) {
    for (const auto& [doc, g] : q->second) out.push_back(g);
  }
  return out;
}

RankedRun read_run(std::istream& in, const std::string& source) {
  RankedRun run;
  std::map<std::string, std::set<std::string>> seen;
  bool tagged = false;
  for_each_line(in, source, [&](const std::vector<std::string>& f) {
    if (f.size() != 6) throw Error("expected 6 fields 'qid Q0 docid rank score tag', got " + std::to_string(f.size()));
    auto& entries = run.queries[f[0]];
    const long rank = parse_int(f[3], "rank");
    if (rank != static_cast<long>(entries.size()) + 1) {
      throw Error("rank " + f[3] + " for query '" + f[0] + "' is not contiguous");
    }
    if (!seen[f[0]].insert(f[2]).second) throw Error("duplicate document '" + f[2] + "' for query '" + f[0] + "'");
    entries.push_back({f[2], parse_double(f[4])});
    if (!tagged) {
      run.tag = f[5];
      tagged = true;
    }
  });
  return run;
}

RankedRun load_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open run file '" + path + "'");
  return read_run(in, path);
}

void write_run(const RankedRun& run, std::ostream& out) {
  char score[64];
  for (const auto& [qid, entries] : run.queries) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      std::snprintf(score, sizeof score, "%.6f", entries[i].score);
      out << qid << " Q0 " << entries[i].doc_id << ' ' << i + 1 << ' ' << score << ' ' << run.tag << '\n';
    }
  }
}

Qrels read_qrels(std::istream& in, const std::string& source) {
  Qrels qrels;
  for_each_line(in, source, [&](const std::vector<std::string>& f) {
    if (f.size() != 4) throw Error("expected 4 fields 'qid 0 docid grade', got " + std::to_string(f.size()));
    qrels.set(f[0], f[2], static_cast<int>(parse_int(f[3], "grade")));
  });
  return qrels;
}

Qrels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open qrels file '" + path + "'");
  return read_qrels(in, path);
}

void write_qrels(const Qrels& qrels, std::ostream& out) {
  for (const auto& [qid, docs] : qrels.data()) {
    for (const auto& [doc, g] : docs) out << qid << " 0 " << doc << ' ' << g << '\n';
  }
}

MetricDetail mrr_at_k(const RankedRun& run, const Qrels& qrels, std::size_t k) {
  if (run.queries.empty()) throw Error("cannot evaluate an empty run");
  if (k == 0) throw Error("cutoff must be positive");
  MetricDetail out;
  double sum = 0.0;
  for (const auto& [qid, entries] : run.queries) {
    if (!qrels.has_query(qid)) {
      out.unjudged_queries.push_back(qid);
      continue;
    }
    const std::size_t depth = std::min(k, entries.size());
    for (std::size_t i = 0; i < depth; ++i) {
      if (qrels.grade(qid, entries[i].doc_id) >= 1) {
        sum += 1.0 / static_cast<double>(i + 1);
        break;
      }
    }
  }
  out.value = sum / static_cast<double>(run.queries.size());
  return out;
}

MetricDetail ndcg_at_k(const RankedRun& run, const Qrels& qrels, std::size_t k) {
  if (run.queries.empty()) throw Error("cannot evaluate an empty run");
  if (k == 0) throw Error("cutoff must be positive");
  auto gain = [](int g) { return std::exp2(static_cast<double>(g)) - 1.0; };
  auto discount = [](std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); };
  MetricDetail out;
  double sum = 0.0;
  for (const auto& [qid, entries] : run.queries) {
    if (!qrels.has_query(qid)) {
      out.unjudged_queries.push_back(qid);
      continue;
    }
    auto ideal = qrels.grades(qid);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) idcg += gain(ideal[i]) * discount(i + 1);
    if (idcg <= 0.0) continue;
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) {
      dcg += gain(qrels.grade(qid, entries[i].doc_id)) * discount(i + 1);
    }
    sum += dcg / idcg;
  }
  out.value = sum / static_cast<double>(run.queries.size());
  return out;
}

}  // namespace anchorpt
