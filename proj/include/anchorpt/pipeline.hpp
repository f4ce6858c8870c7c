#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "anchorpt/encoder.hpp"
#include "anchorpt/pretrain.hpp"
#include "anchorpt/ranker.hpp"
#include "anchorpt/synthetic.hpp"
#include "anchorpt/taskgen.hpp"

namespace anchorpt {

/// Artifact locations. Relative paths resolve against work_dir.
struct PathConfig {
  std::string work_dir = ".";
  std::string data_dir = "data";
  std::string raw_corpus = "data/corpus.jsonl";
  std::string corpus = "corpus.clean.jsonl";
  std::string corpus_index = "corpus.index.txt";
  std::string vocab = "vocab.txt";
  std::string stopwords;  // empty = built-in English list
  std::string sampler_checkpoint = "sampler.ckpt";
  std::string pairs = "pairs.jsonl";
  std::string pretrained_checkpoint = "pretrained.ckpt";
  std::string pretrain_log = "pretrain.log.jsonl";
  std::string finetuned_checkpoint = "finetuned.ckpt";
  std::string docs = "data/docs.jsonl";
  std::string train_queries = "data/queries.train.tsv";
  std::string test_queries = "data/queries.test.tsv";
  std::string train_candidates = "data/candidates.train.txt";
  std::string test_candidates = "data/candidates.test.txt";
  std::string qrels = "data/qrels.txt";
  std::string run = "run.test.txt";
  std::string metrics = "metrics.json";

  std::string resolve(const std::string& path) const;
};

/// Everything a pipeline command needs. Stage seeds are derived from `seed`.
struct RunConfig {
  std::string profile = "toy";
  std::uint64_t seed = 0;
  PathConfig paths;
  std::size_t min_words = 100;
  std::size_t vocab_size = 1000;
  EncoderConfig encoder;
  TaskGenOptions taskgen;
  TrainConfig warm;
  TrainConfig pretrain;
  FinetuneConfig finetune;
  double heldout_fraction = 0.1;
  std::size_t rerank_depth = 100;
  SyntheticOptions synthetic;

  /// Defaults of the named profile ("toy" or "full").
  static RunConfig for_profile(std::string_view profile);

  nlohmann::ordered_json to_json() const;
  /// Overlays the keys present in `j` on `base`. Unknown keys are rejected.
  static RunConfig from_json(const nlohmann::json& j, const RunConfig& base);

  /// Copies the master seed into every stage seed.
  void derive_stage_seeds();
};

/// Reads the config file (when given) over the profile defaults, applies the
/// overrides and derives the stage seeds. The profile comes from the
/// override, else the file, else "toy". The seed is mandatory: it must be
/// given in the file or on the command line.
RunConfig resolve_run_config(const std::optional<std::string>& config_path,
                             const std::optional<std::string>& profile_override,
                             const std::optional<std::uint64_t>& seed_override);

struct PretrainResult {
  TrainReport report;
  double heldout_accuracy = 0.0;
  std::array<double, kTaskCount> heldout_task_accuracy{};
  std::array<std::size_t, kTaskCount> heldout_task_pairs{};
  std::size_t train_pairs = 0;
  std::size_t heldout_pairs = 0;
};

struct EvalReport {
  double mrr10 = 0.0, mrr100 = 0.0, ndcg10 = 0.0, ndcg100 = 0.0;
  std::size_t queries = 0;
  std::vector<std::string> unjudged_queries;

  nlohmann::ordered_json to_json() const;
};

EvalReport evaluate(const RankedRun& run, const Qrels& qrels);
std::string format_eval_table(const EvalReport& report);

/// Deterministic held-out split: returns (train, heldout).
std::pair<std::vector<PretrainPair>, std::vector<PretrainPair>> split_heldout(std::vector<PretrainPair> pairs,
                                                                              double fraction, std::uint64_t seed);

/// Reranks every query of `candidates` to depth k.
RankedRun rerank_all(const Ranker& ranker, const QuerySet& queries, const CandidateLists& candidates,
                     const DocCollection& docs, std::size_t k, const std::string& tag);

// Pipeline commands. Each prints the resolved config and seed to `log`,
// validates that its inputs exist (naming the producing command otherwise)
// and writes its outputs under paths.work_dir.
void cmd_synth(const RunConfig& config, std::ostream& log);
void cmd_ingest(const RunConfig& config, std::ostream& log);
void cmd_warm_sampler(const RunConfig& config, std::ostream& log);
PairBuildReport cmd_build_pairs(const RunConfig& config, std::ostream& log);
PretrainResult cmd_pretrain(const RunConfig& config, std::ostream& log);
FinetuneReport cmd_finetune(const RunConfig& config, std::ostream& log);
void cmd_rerank(const RunConfig& config, std::ostream& log);
EvalReport cmd_eval(const RunConfig& config, std::ostream& log);

/// Names accepted by run_command, in pipeline order ("all" runs them all).
const std::vector<std::string>& command_names();
void run_command(std::string_view name, const RunConfig& config, std::ostream& log);

}  // namespace anchorpt
