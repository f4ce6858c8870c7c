// Acceptance harness: one PASS/FAIL line per criterion.
//
//   anchorpt_acceptance [--work-dir DIR] [--only 1,4,6]
//
// Criteria 4, 6 and 7 share the toy pipeline runs under DIR/seed<N>.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anchorpt/checkpoint.hpp"
#include "anchorpt/corpus.hpp"
#include "anchorpt/evalkit.hpp"
#include "anchorpt/pipeline.hpp"
#include "anchorpt/pretrain.hpp"
#include "anchorpt/ranker.hpp"
#include "anchorpt/sampler.hpp"
#include "anchorpt/stopwords.hpp"
#include "anchorpt/synthetic.hpp"
#include "anchorpt/vocab.hpp"
#include "oracles/gradcheck.hpp"
#include "oracles/metrics.hpp"
#include "oracles/pair_invariants.hpp"

namespace fs = std::filesystem;
using namespace anchorpt;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

template <typename F>
auto read_with(const fs::path& p, F reader) {
  std::ifstream in(p);
  if (!in) throw Error("cannot read " + p.string());
  return reader(in, p.string());
}

// ---------------------------------------------------------------- 1

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  EncoderConfig c;
  c.layers = 1;
  c.heads = 2;
  c.hidden = 16;
  c.ffn_dim = 32;
  c.vocab_size = 30;
  c.max_len = 24;
  auto enc = oracle::noisy_encoder(c, 101);

  TrainConfig config;
  config.task_weights = {1.0, 0.8, 1.2, 0.6};
  config.mlm_weight = 1.0;
  config.mask_rate = 0.3;
  std::vector<PreparedPair> batch;
  Rng data(5);
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<int> q, d1, d2;
    for (int k = 0; k < 2 + int(i % 2); ++k) q.push_back(5 + int(uniform_index(data, 25)));
    for (int k = 0; k < 5; ++k) d1.push_back(5 + int(uniform_index(data, 25)));
    for (int k = 0; k < 4; ++k) d2.push_back(5 + int(uniform_index(data, 25)));
    batch.push_back({kAllTasks[i], pack_input(q, d1, 24), pack_input(q, d2, 24)});
  }
  Rng mask_rng(6);
  const auto masked = mask_batch(batch, c.vocab_size, config, mask_rng);
  const auto r = oracle::check_gradients(enc, masked, config, 1e-4);
  const double elapsed = seconds_since(t0);
  return {r.max_relative_error <= 1e-3 && elapsed < 60.0,
          fmt("max relative error %.2e (worst %s) over %zu parameters, %.1fs", r.max_relative_error,
              r.worst_tensor.c_str(), r.checked, elapsed)};
}

// ---------------------------------------------------------------- 2

Outcome distribution_invariants() {
  Rng rng(202);
  double worst_row = 0.0, worst_alpha = 0.0, worst_dist = 0.0, min_entry = 0.0;
  std::size_t excluded_mass_violations = 0;

  // Attention rows and anchor-position averages on random encoders/inputs.
  const int widths[] = {8, 16, 24};
  for (int trial = 0; trial < 1000; ++trial) {
    EncoderConfig c;
    c.layers = 1 + int(uniform_index(rng, 2));
    c.heads = 1 << uniform_index(rng, 3);
    c.hidden = widths[uniform_index(rng, 3)];
    if (c.hidden % c.heads != 0) c.heads = 2;
    c.ffn_dim = 2 * c.hidden;
    c.vocab_size = 20 + int(uniform_index(rng, 60));
    c.max_len = 48;
    const auto enc = oracle::noisy_encoder(c, 1000 + std::uint64_t(trial), 0.5 + uniform01(rng));
    const std::size_t n = 2 + uniform_index(rng, 47);
    std::vector<int> ids(n), seg(n, 0);
    for (auto& id : ids) id = int(uniform_index(rng, std::size_t(c.vocab_size)));
    for (std::size_t i = n / 2; i < n; ++i) seg[i] = 1;
    const auto maps = enc.encode(ids, seg).attention;
    for (const auto& layer : maps) {
      for (const auto& head : layer) {
        min_entry = std::min(min_entry, head.minCoeff());
        for (Eigen::Index r = 0; r < head.rows(); ++r) worst_row = std::max(worst_row, std::abs(head.row(r).sum() - 1.0));
      }
    }
    std::vector<std::size_t> positions;
    const std::size_t span = 1 + uniform_index(rng, std::min<std::size_t>(3, n));
    const std::size_t start = uniform_index(rng, n - span + 1);
    for (std::size_t p = start; p < start + span; ++p) positions.push_back(p);
    const auto alpha = attention_from_position(maps, maps.size() - 1, positions);
    double s = 0.0;
    for (double a : alpha) s += a;
    worst_alpha = std::max(worst_alpha, std::abs(s - 1.0));
  }

  // Term distributions on a synthetic corpus, read through random encoders.
  SyntheticOptions so;
  so.topics = 6;
  so.pages_per_topic = 5;
  so.short_pages = 0;
  so.ambiguous_titles = 2;
  const auto corpus = clean_corpus(HyperlinkCorpus(generate_synthetic(so).pages), 60);
  const auto vocab = build_vocab(corpus, 400);
  const auto stopwords = StopwordList::english();
  std::vector<std::pair<const Sentence*, std::size_t>> anchored;
  for (const auto& page : corpus.pages()) {
    for (const auto& s : page.sentences) {
      for (std::size_t a = 0; a < s.anchors.size(); ++a) anchored.emplace_back(&s, a);
    }
  }
  EncoderConfig c;
  c.layers = 2;
  c.heads = 2;
  c.hidden = 16;
  c.ffn_dim = 32;
  c.vocab_size = int(vocab.size());
  c.max_len = 128;
  std::size_t distributions = 0, empty = 0;
  auto check = [&](const TermDistribution& d, const TermSet& excluded) {
    ++distributions;
    worst_dist = std::max(worst_dist, std::abs(d.total() - 1.0));
    for (const auto& t : d.terms) {
      if (excluded.count(t.term) || stopwords.contains(t.term) || t.probability < 0.0) ++excluded_mass_violations;
    }
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const auto enc = oracle::noisy_encoder(c, 5000 + std::uint64_t(trial), 0.3 + 2.0 * uniform01(rng));
    const EncoderAttention attention(enc);
    try {
      if (trial % 2 == 0) {
        const auto& [sentence, a] = anchored[uniform_index(rng, anchored.size())];
        TermSet excluded;
        for (std::size_t k = sentence->anchors[a].token_begin; k < sentence->anchors[a].token_end; ++k) {
          excluded.insert(sentence->tokens[k]);
        }
        check(anchor_term_distribution(attention, vocab, stopwords, *sentence, a), excluded);
      } else {
        const auto& page = corpus.pages()[uniform_index(rng, corpus.size())];
        const auto& [sentence, a] = anchored[uniform_index(rng, anchored.size())];
        TermSet excluded;
        for (std::size_t k = sentence->anchors[a].token_begin; k < sentence->anchors[a].token_end; ++k) {
          excluded.insert(sentence->tokens[k]);
        }
        check(cls_term_distribution(attention, vocab, stopwords, page.first_section, excluded), excluded);
      }
    } catch (const EmptySupportError&) {
      ++empty;
    }
  }
  const bool pass = worst_row <= 1e-6 && min_entry >= 0.0 && worst_alpha <= 1e-6 && worst_dist <= 1e-9 &&
                    excluded_mass_violations == 0 && distributions >= 900;
  return {pass, fmt("attention |row-1| max %.1e, alpha |sum-1| max %.1e (1000 inputs); %zu distributions, "
                    "|sum-1| max %.1e, %zu excluded-term violations, %zu empty supports",
                    worst_row, worst_alpha, distributions, worst_dist, excluded_mass_violations, empty)};
}

// ---------------------------------------------------------------- 3

Outcome sampling_oracle() {
  std::vector<TermWeight> w;
  const double weights[] = {0.3, 1.2, -0.4, 0.0, 0.9, 0.5, -1.0};
  for (std::size_t i = 0; i < 7; ++i) w.push_back({"t" + std::to_string(i), weights[i], i});
  const auto dist = normalize(w, {});
  Rng rng(303);
  std::map<std::string, int> counts;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) ++counts[sample_word_set(dist, 1, std::nullopt, rng).terms.at(0)];
  double worst = 0.0;
  for (const auto& t : dist.terms) worst = std::max(worst, std::abs(counts[t.term] / double(trials) - t.probability));

  const double lambda = 3.0;
  const double expected = lambda / (1.0 - std::exp(-lambda));
  double sum = 0.0;
  for (int i = 0; i < trials; ++i) sum += poisson_length(lambda, rng);
  const double rel = std::abs(sum / trials - expected) / expected;
  return {worst <= 0.01 && rel <= 0.01 && std::abs(expected - 3.1572) < 5e-5,
          fmt("first-draw max |freq-p| %.4f; truncated Poisson mean %.4f vs %.4f (rel %.4f)", worst, sum / trials,
              expected, rel)};
}

// ---------------------------------------------------------------- 5

Outcome loss_identities() {
  Rng rng(505);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  std::size_t hinge_mismatch = 0;
  for (int i = 0; i < 100000; ++i) {
    const double p = u(rng), n = u(rng);
    if (hinge_loss(p, n) != std::max(0.0, 1.0 - p + n)) ++hinge_mismatch;
  }
  double worst_mlm = 0.0;
  for (int v : {5, 37, 1000, 30000}) {
    const Matrix logits = Matrix::Constant(7, v, u(rng));
    std::vector<int> labels;
    for (int i = 0; i < 7; ++i) labels.push_back(int(uniform_index(rng, std::size_t(v))));
    worst_mlm = std::max(worst_mlm, std::abs(mlm_loss(logits, labels) - std::log(double(v))));
  }

  EncoderConfig c;
  c.layers = 1;
  c.heads = 2;
  c.hidden = 16;
  c.ffn_dim = 32;
  c.vocab_size = 50;
  c.max_len = 32;
  double worst_total = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    auto enc = oracle::noisy_encoder(c, 50 + std::uint64_t(trial));
    TrainConfig config;
    for (auto& w : config.task_weights) w = uniform01(rng) < 0.2 ? 0.0 : 2.0 * uniform01(rng);
    config.mlm_weight = uniform01(rng) < 0.2 ? 0.0 : 2.0 * uniform01(rng);
    std::vector<PreparedPair> batch;
    const std::size_t size = 1 + uniform_index(rng, 10);
    for (std::size_t i = 0; i < size; ++i) {
      std::vector<int> q, d1, d2;
      for (std::size_t k = 0; k < 1 + uniform_index(rng, 4); ++k) q.push_back(5 + int(uniform_index(rng, 45)));
      for (std::size_t k = 0; k < 2 + uniform_index(rng, 8); ++k) d1.push_back(5 + int(uniform_index(rng, 45)));
      for (std::size_t k = 0; k < 2 + uniform_index(rng, 8); ++k) d2.push_back(5 + int(uniform_index(rng, 45)));
      batch.push_back({kAllTasks[uniform_index(rng, kTaskCount)], pack_input(q, d1, 32), pack_input(q, d2, 32)});
    }
    auto state = AdamState::zeros(c);
    const auto s = joint_step(enc, state, batch, config, rng);
    double sum = s.mlm_contribution;
    for (double t : s.task_contribution) sum += t;
    worst_total = std::max(worst_total, std::abs(s.total - sum));
  }
  return {hinge_mismatch == 0 && worst_mlm <= 1e-9 && worst_total <= 1e-9,
          fmt("hinge mismatches %zu/100000; |mlm-ln V| max %.1e; |total-sum| max %.1e over 50 steps", hinge_mismatch,
              worst_mlm, worst_total)};
}

// ---------------------------------------------------------------- 8

Outcome metric_oracle() {
  Rng rng(808);
  double worst = 0.0;
  for (int instance = 0; instance < 100; ++instance) {
    RankedRun run;
    Qrels qrels;
    std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> plain;
    const std::size_t queries = 1 + uniform_index(rng, 5);
    for (std::size_t qi = 0; qi < queries; ++qi) {
      const std::string qid = "q" + std::to_string(qi);
      auto& [ranked, judged] = plain[qid];
      const std::size_t pool = 1 + uniform_index(rng, 20);
      std::vector<std::string> docs;
      for (std::size_t d = 0; d < pool; ++d) docs.push_back("d" + std::to_string(d));
      std::shuffle(docs.begin(), docs.end(), rng);
      for (const auto& doc : docs) {
        const bool judge = uniform01(rng) < 0.7;
        const int grade = judge ? int(uniform_index(rng, 4)) : 0;
        if (judge) {
          qrels.set(qid, doc, grade);
          judged.push_back(grade);
        }
        run.queries[qid].push_back({doc, 0.0});
        ranked.push_back(grade);
      }
    }
    for (std::size_t k : {1, 5, 10, 20}) {
      double mrr = 0.0, ndcg = 0.0;
      for (const auto& [qid, v] : plain) {
        mrr += oracle::reciprocal_rank(v.first, k);
        ndcg += oracle::ndcg(v.first, v.second, k);
      }
      mrr /= double(plain.size());
      ndcg /= double(plain.size());
      worst = std::max({worst, std::abs(mrr_at_k(run, qrels, k).value - mrr),
                        std::abs(ndcg_at_k(run, qrels, k).value - ndcg)});
    }
  }
  Qrels q;
  q.set("q", "a", 3);
  q.set("q", "b", 0);
  q.set("q", "c", 2);
  RankedRun example;
  example.queries["q"] = {{"a", 3.0}, {"b", 2.0}, {"c", 1.0}};
  const double v = ndcg_at_k(example, q, 10).value;
  const double hand = 8.5 / (7.0 + 3.0 / std::log2(3.0));
  return {worst <= 1e-9 && std::abs(v - hand) <= 1e-12 && std::abs(v - 0.9558) < 5e-5,
          fmt("max |metric-oracle| %.1e over 100 instances; worked nDCG@10 %.6f", worst, v)};
}

// ------------------------------------------------------ toy pipeline runs

struct SeedRun {
  RunConfig config;
  double stage_seconds = 0.0;
  PairBuildReport pairs;
  PretrainResult pretrain;
  EvalReport eval;
  bool complete = false;
};

class ToyRuns {
 public:
  explicit ToyRuns(fs::path root) : root_(std::move(root)) {}

  static RunConfig config_for(const fs::path& dir, std::uint64_t seed) {
    auto c = RunConfig::for_profile("toy");
    c.seed = seed;
    c.paths.work_dir = dir.string();
    c.derive_stage_seeds();
    return c;
  }

  // synth .. build-pairs for `seed` in DIR/seed<N>.
  SeedRun& pairs(std::uint64_t seed) {
    auto& run = runs_[seed];
    if (run.config.paths.work_dir != ".") return run;
    run.config = config_for(root_ / ("seed" + std::to_string(seed)), seed);
    fs::remove_all(run.config.paths.work_dir);
    const auto t0 = Clock::now();
    std::ostringstream log;
    cmd_synth(run.config, log);
    cmd_ingest(run.config, log);
    cmd_warm_sampler(run.config, log);
    run.pairs = cmd_build_pairs(run.config, log);
    run.stage_seconds += seconds_since(t0);
    return run;
  }

  // pretrain .. eval on top of pairs(seed).
  SeedRun& full(std::uint64_t seed) {
    auto& run = pairs(seed);
    if (run.complete) return run;
    const auto t0 = Clock::now();
    std::ostringstream log;
    run.pretrain = cmd_pretrain(run.config, log);
    cmd_finetune(run.config, log);
    cmd_rerank(run.config, log);
    run.eval = cmd_eval(run.config, log);
    run.stage_seconds += seconds_since(t0);
    run.complete = true;
    return run;
  }

  // Same pairs with one pre-training weight zeroed, own output paths.
  EvalReport ablated(std::uint64_t seed, Task removed) {
    auto c = pairs(seed).config;
    c.pretrain.task_weights[task_index(removed)] = 0.0;
    const std::string tag = ".no" + std::string(task_name(removed));
    c.paths.pretrained_checkpoint = "pretrained" + tag + ".ckpt";
    c.paths.pretrain_log = "pretrain" + tag + ".log.jsonl";
    c.paths.finetuned_checkpoint = "finetuned" + tag + ".ckpt";
    c.paths.run = "run" + tag + ".txt";
    c.paths.metrics = "metrics" + tag + ".json";
    std::ostringstream log;
    cmd_pretrain(c, log);
    cmd_finetune(c, log);
    cmd_rerank(c, log);
    return cmd_eval(c, log);
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::map<std::uint64_t, SeedRun> runs_;
};

constexpr std::uint64_t kMainSeed = 1;

// ---------------------------------------------------------------- 4

Outcome pair_invariants(ToyRuns& toy) {
  auto& run = toy.pairs(kMainSeed);
  const fs::path dir = run.config.paths.work_dir;
  const auto raw = load_corpus(run.config.paths.resolve(run.config.paths.raw_corpus));
  const auto corpus = load_corpus(run.config.paths.resolve(run.config.paths.corpus));
  const auto index = anchor_occurrence_index(corpus);
  const auto pairs = read_with(dir / "pairs.jsonl", [](std::istream& in, const std::string& s) { return read_pairs(in, s); });
  std::size_t bad = 0;
  std::string first_problem;
  std::array<std::size_t, kTaskCount> per_task{};
  for (const auto& p : pairs) {
    ++per_task[task_index(p.task)];
    const auto problem = oracle::check_pair(p, corpus, index);
    if (!problem.empty()) {
      if (bad++ == 0) first_problem = p.seed_path + ": " + problem;
    }
  }

  // Bitwise reproducibility: the same seed in a fresh directory.
  const auto twin = ToyRuns::config_for(toy.root() / "seed1_twin", kMainSeed);
  fs::remove_all(twin.paths.work_dir);
  std::ostringstream log;
  cmd_synth(twin, log);
  cmd_ingest(twin, log);
  cmd_warm_sampler(twin, log);
  cmd_build_pairs(twin, log);
  const bool identical = slurp(dir / "pairs.jsonl") == slurp(fs::path(twin.paths.work_dir) / "pairs.jsonl");
  bool all_tasks = true;
  for (auto n : per_task) all_tasks = all_tasks && n > 0;

  return {bad == 0 && identical && !pairs.empty() && all_tasks && raw.size() >= 150 && raw.size() <= 250,
          fmt("%zu raw pages, %zu pairs (RQP %zu QDM %zu RDP %zu ACM %zu), %zu invalid%s%s; rerun %s", raw.size(),
              pairs.size(), per_task[0], per_task[1], per_task[2], per_task[3], bad, bad ? ", first: " : "",
              first_problem.c_str(), identical ? "bitwise identical" : "DIFFERS")};
}

// ---------------------------------------------------------------- 6

Outcome end_to_end(ToyRuns& toy) {
  auto& run = toy.full(kMainSeed);
  const auto& c = run.config;

  // Untrained baseline: the pre-training initialization, fine-tuned and
  // evaluated on the same data.
  const auto t0 = Clock::now();
  const auto pretrained = load_checkpoint(c.paths.resolve(c.paths.pretrained_checkpoint));
  const auto docs = read_with(c.paths.resolve(c.paths.docs), [](std::istream& in, const std::string& s) { return read_docs(in, s); });
  const auto qrels = read_with(c.paths.resolve(c.paths.qrels), [](std::istream& in, const std::string& s) { return read_qrels(in, s); });
  auto load_q = [](const std::string& p) { return read_with(p, [](std::istream& in, const std::string& s) { return read_queries(in, s); }); };
  auto load_c = [](const std::string& p) { return read_with(p, [](std::istream& in, const std::string& s) { return read_candidates(in, s); }); };
  const auto train_q = load_q(c.paths.resolve(c.paths.train_queries));
  const auto test_q = load_q(c.paths.resolve(c.paths.test_queries));
  const auto test_c = load_c(c.paths.resolve(c.paths.test_candidates));
  const auto examples = ranking_examples(train_q, load_c(c.paths.resolve(c.paths.train_candidates)), qrels);

  Ranker untouched(Encoder(pretrained.config, init_parameters(pretrained.config, derive_seed(c.seed, "init"))),
                   pretrained.vocab);
  const double raw_mrr = evaluate(rerank_all(untouched, test_q, test_c, docs, c.rerank_depth, "init"), qrels).mrr10;
  Ranker baseline = untouched;
  finetune(baseline, examples, docs, c.finetune);
  const double base_mrr = evaluate(rerank_all(baseline, test_q, test_c, docs, c.rerank_depth, "base"), qrels).mrr10;
  const double baseline_seconds = seconds_since(t0);

  const bool pass = run.pretrain.heldout_accuracy >= 0.90 && run.pretrain.report.steps <= 2000 &&
                    run.eval.mrr10 >= 0.9 && base_mrr <= 0.55 && train_q.size() == 50 && pretrained.vocab.size() <= 1000 &&
                    run.stage_seconds < 900.0;
  std::ostringstream tasks;
  for (Task t : kAllTasks) tasks << ' ' << task_name(t) << '=' << fmt("%.3f", run.pretrain.heldout_task_accuracy[task_index(t)]);
  return {pass, fmt("held-out accuracy %.4f after %zu steps (%s ); MRR@10 %.4f vs untrained+fine-tuned %.4f "
                    "(untrained, no fine-tuning %.4f); vocab %zu; %zu train queries; pipeline %.0fs (+%.0fs baseline)",
                    run.pretrain.heldout_accuracy, run.pretrain.report.steps, tasks.str().c_str(), run.eval.mrr10,
                    base_mrr, raw_mrr, pretrained.vocab.size(), train_q.size(), run.stage_seconds, baseline_seconds)};
}

// ---------------------------------------------------------------- 7

Outcome ablations(ToyRuns& toy) {
  auto& main = toy.pairs(kMainSeed);
  std::ostringstream detail;
  bool harness_ok = true;

  // Each component off in turn: a short run must finish, log a loss for
  // every task and give the disabled term no weight.
  const char* names[] = {"RQP", "QDM", "RDP", "ACM", "MLM"};
  for (std::size_t off = 0; off < 5; ++off) {
    auto c = main.config;
    if (off < kTaskCount) c.pretrain.task_weights[off] = 0.0;
    else c.pretrain.mlm_weight = 0.0;
    c.pretrain.max_steps = 60;
    c.pretrain.log_every = 20;
    const std::string tag = std::string(".short-no") + names[off];
    c.paths.pretrained_checkpoint = "pretrained" + tag + ".ckpt";
    c.paths.pretrain_log = "pretrain" + tag + ".log.jsonl";
    std::ostringstream log;
    const auto r = cmd_pretrain(c, log);
    std::array<double, kTaskCount> hinge{};
    std::array<std::size_t, kTaskCount> seen{};
    double mlm = 0.0, disabled = 0.0;
    bool finite = r.report.steps == 60 && !r.report.log.empty();
    for (const auto& s : r.report.log) {
      finite = finite && std::isfinite(s.total);
      for (std::size_t t = 0; t < kTaskCount; ++t) {
        if (s.task_pairs[t] == 0) continue;
        hinge[t] += s.task_hinge[t];
        ++seen[t];
      }
      mlm += s.mlm / double(r.report.log.size());
      disabled += off < kTaskCount ? std::abs(s.task_contribution[off]) : std::abs(s.mlm_contribution);
    }
    detail << "no-" << names[off] << " [";
    for (std::size_t t = 0; t < kTaskCount; ++t) {
      finite = finite && seen[t] > 0;
      detail << task_name(kAllTasks[t]) << '=' << fmt("%.3f", seen[t] ? hinge[t] / double(seen[t]) : NAN) << ' ';
    }
    detail << "MLM=" << fmt("%.3f", mlm) << "] ";
    harness_ok = harness_ok && finite && disabled == 0.0;
  }

  // Removing RQP on the full toy run, three seeds.
  double gain = 0.0;
  for (std::uint64_t seed : {kMainSeed, kMainSeed + 1, kMainSeed + 2}) {
    const double full = toy.full(seed).eval.mrr10;
    const double no_rqp = toy.ablated(seed, Task::kRqp).mrr10;
    gain += (no_rqp - full) / 3.0;
    detail << fmt("seed %llu MRR@10 full %.4f no-RQP %.4f; ", static_cast<unsigned long long>(seed), full, no_rqp);
  }
  detail << fmt("mean gain from removing RQP %+.4f", gain);
  return {harness_ok && gain <= 0.02, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work-dir", work, "scratch directory for the toy runs");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  fs::create_directories(work);
  ToyRuns toy(fs::absolute(work));
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"attention and distribution invariants", distribution_invariants},
      {"sampling oracle", sampling_oracle},
      {"pair-construction invariants", [&] { return pair_invariants(toy); }},
      {"loss identities", loss_identities},
      {"end-to-end toy experiment", [&] { return end_to_end(toy); }},
      {"ablation harness", [&] { return ablations(toy); }},
      {"metric oracle", metric_oracle},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << ", "
              << fmt("%.0fs", seconds_since(t0)) << "): " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
