#include "anchorpt/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "anchorpt/checkpoint.hpp"
#include "anchorpt/corpus.hpp"
#include "anchorpt/error.hpp"
#include "anchorpt/evalkit.hpp"
#include "anchorpt/sampler.hpp"
#include "anchorpt/stopwords.hpp"
#include "anchorpt/vocab.hpp"

namespace anchorpt {
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

ojson per_task(const std::array<double, kTaskCount>& v) {
  ojson j;
  for (Task t : kAllTasks) j[std::string(task_name(t))] = v[task_index(t)];
  return j;
}

ojson per_task(const std::array<std::size_t, kTaskCount>& v) {
  ojson j;
  for (Task t : kAllTasks) j[std::string(task_name(t))] = v[task_index(t)];
  return j;
}

template <class T>
std::array<T, kTaskCount> per_task_from(const nlohmann::json& j) {
  std::array<T, kTaskCount> out{};
  for (Task t : kAllTasks) out[task_index(t)] = j.at(std::string(task_name(t))).get<T>();
  return out;
}

ojson train_to_json(const TrainConfig& c) {
  return ojson{{"lr", c.lr},
               {"epochs", c.epochs},
               {"batch_size", c.batch_size},
               {"task_weights", per_task(c.task_weights)},
               {"mlm_weight", c.mlm_weight},
               {"mask_rate", c.mask_rate},
               {"max_steps", c.max_steps},
               {"log_every", c.log_every}};
}

TrainConfig train_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr = j.at("lr").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.task_weights = per_task_from<double>(j.at("task_weights"));
  c.mlm_weight = j.at("mlm_weight").get<double>();
  c.mask_rate = j.at("mask_rate").get<double>();
  c.max_steps = j.at("max_steps").get<std::size_t>();
  c.log_every = j.at("log_every").get<std::size_t>();
  return c;
}

// Rejects keys in `patch` that the defaults do not know about.
void check_known(const nlohmann::json& known, const nlohmann::json& patch, const std::string& prefix) {
  if (!patch.is_object()) return;
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (!known.contains(it.key())) throw Error("unknown config key '" + prefix + it.key() + "'");
    if (known.at(it.key()).is_object()) check_known(known.at(it.key()), it.value(), prefix + it.key() + ".");
  }
}

void require(const RunConfig& config, const std::string& path, const std::string& artifact,
             const std::string& producer) {
  const auto resolved = config.paths.resolve(path);
  if (!fs::exists(resolved)) {
    throw Error("missing " + artifact + " '" + resolved + "'; run '" + producer + "' first");
  }
}

std::ofstream open_output(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

void announce(const RunConfig& config, std::string_view command, std::ostream& log) {
  log << "[" << command << "] seed: " << config.seed << "\n";
  log << "[" << command << "] config: " << config.to_json().dump() << "\n";
}

// Sidecar that records how a text artifact was produced.
void write_provenance(const RunConfig& config, std::string_view command, const std::string& artifact) {
  auto out = open_output(artifact + ".provenance.json");
  ojson j{{"command", command}, {"seed", config.seed}, {"config", config.to_json()}};
  out << j.dump(2) << '\n';
}

StopwordList load_stopwords(const RunConfig& config) {
  if (config.paths.stopwords.empty()) return StopwordList::english();
  return StopwordList::load(config.paths.resolve(config.paths.stopwords));
}

HyperlinkCorpus load_clean_corpus(const RunConfig& config) {
  require(config, config.paths.corpus, "cleaned corpus", "ingest");
  return load_corpus(config.paths.resolve(config.paths.corpus));
}

Vocabulary load_vocab(const RunConfig& config) {
  require(config, config.paths.vocab, "vocabulary", "ingest");
  std::ifstream in(config.paths.resolve(config.paths.vocab));
  return Vocabulary::read(in);
}

EncoderConfig encoder_config(const RunConfig& config, const Vocabulary& vocab) {
  EncoderConfig c = config.encoder;
  c.vocab_size = static_cast<int>(vocab.size());
  c.validate();
  return c;
}

std::vector<PretrainPair> read_pairs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pairs file '" + path + "'");
  return read_pairs(in, path);
}

ojson step_to_json(const StepStats& s) {
  ojson j{{"step", s.step}};
  j["pairs"] = per_task(s.task_pairs);
  j["hinge"] = per_task(s.task_hinge);
  j["contribution"] = per_task(s.task_contribution);
  j["mlm"] = s.mlm;
  j["mlm_contribution"] = s.mlm_contribution;
  j["masked_positions"] = s.masked_positions;
  j["total"] = s.total;
  return j;
}

void log_step(std::ostream& log, std::string_view stage, const StepStats& s) {
  log << "[" << stage << "] step " << s.step;
  for (Task t : kAllTasks) {
    if (s.task_pairs[task_index(t)] > 0) log << ' ' << task_name(t) << '=' << std::setprecision(4) << s.task_hinge[task_index(t)];
  }
  log << " MLM=" << std::setprecision(4) << s.mlm << " total=" << s.total << '\n';
}

// Trains on `pairs` and saves the checkpoint; shared by warm-sampler and pretrain.
TrainReport train_and_save(const RunConfig& config, const TrainConfig& train_config, const Vocabulary& vocab,
                           const std::vector<PreparedPair>& prepared, std::uint64_t init_seed,
                           const std::string& checkpoint_path, std::string_view stage, std::ostream& log,
                           std::ostream* step_log, const std::vector<PreparedPair>* heldout,
                           PretrainResult* result) {
  const EncoderConfig ec = encoder_config(config, vocab);
  Encoder encoder(ec, init_parameters(ec, init_seed));
  AdamState state = AdamState::zeros(ec);
  auto report = train(encoder, state, prepared, train_config, [&](const StepStats& s) {
    log_step(log, stage, s);
    if (step_log) *step_log << step_to_json(s).dump() << '\n';
  });
  ojson meta{{"stage", stage}, {"seed", config.seed}, {"config", config.to_json()}, {"steps", report.steps}};
  if (heldout && result) {
    result->heldout_accuracy = pairwise_accuracy(encoder, *heldout);
    for (Task t : kAllTasks) {
      std::vector<PreparedPair> subset;
      for (const auto& p : *heldout) {
        if (p.task == t) subset.push_back(p);
      }
      result->heldout_task_pairs[task_index(t)] = subset.size();
      result->heldout_task_accuracy[task_index(t)] = pairwise_accuracy(encoder, subset);
    }
    meta["heldout_accuracy"] = result->heldout_accuracy;
    meta["heldout_task_accuracy"] = per_task(result->heldout_task_accuracy);
  }
  Checkpoint ckpt{ec, encoder.params(), vocab, state, nlohmann::json::parse(meta.dump())};
  const auto out = config.paths.resolve(checkpoint_path);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_checkpoint(ckpt, out);
  log << "[" << stage << "] " << report.steps << " steps, checkpoint " << out << '\n';
  return report;
}

}  // namespace

std::string PathConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  if (p.is_absolute()) return p.string();
  return (fs::path(work_dir) / p).lexically_normal().string();
}

RunConfig RunConfig::for_profile(std::string_view profile) {
  RunConfig c;
  if (profile == "toy") {
    c.profile = "toy";
    c.vocab_size = 995;  // 1000 with the specials
    c.encoder = EncoderConfig{2, 4, 64, 128, 0, 96, 0.0};
    c.taskgen.lambda = 3.0;
    c.taskgen.summary_tokens = 48;
    c.taskgen.max_query_tokens = 32;
    c.warm.lr = 1e-3;
    c.warm.epochs = 3;
    c.warm.batch_size = 16;
    c.warm.task_weights = {0.0, 0.0, 0.0, 0.0};
    c.warm.max_steps = 300;
    c.warm.log_every = 100;
    c.pretrain.lr = 1e-3;
    c.pretrain.epochs = 20;
    c.pretrain.batch_size = 64;
    c.pretrain.max_steps = 2000;
    c.pretrain.log_every = 200;
    c.finetune.lr = 1e-4;
    c.finetune.epochs = 5;
    c.finetune.batch_size = 16;
    c.finetune.warmup = 0.1;
    c.synthetic.topic_words = 5;
    c.synthetic.body_paragraphs = 8;
  } else if (profile == "full") {
    c.profile = "full";
    c.vocab_size = 30000;
    c.encoder = EncoderConfig{12, 12, 768, 3072, 0, 512, 0.1};
    c.taskgen.summary_tokens = 512;
    c.taskgen.max_query_tokens = 64;
    c.warm.lr = 1e-4;
    c.warm.epochs = 1;
    c.warm.batch_size = 128;
    c.warm.task_weights = {0.0, 0.0, 0.0, 0.0};
    c.pretrain.lr = 1e-4;
    c.pretrain.epochs = 10;
    c.pretrain.batch_size = 128;
    c.finetune.lr = 1e-5;
    c.finetune.epochs = 2;
    c.finetune.batch_size = 128;
  } else {
    throw Error("unknown profile '" + std::string(profile) + "' (expected toy or full)");
  }
  return c;
}

ojson RunConfig::to_json() const {
  ojson j;
  j["profile"] = profile;
  j["seed"] = seed;
  j["paths"] = ojson{{"work_dir", paths.work_dir},
                     {"data_dir", paths.data_dir},
                     {"raw_corpus", paths.raw_corpus},
                     {"corpus", paths.corpus},
                     {"corpus_index", paths.corpus_index},
                     {"vocab", paths.vocab},
                     {"stopwords", paths.stopwords},
                     {"sampler_checkpoint", paths.sampler_checkpoint},
                     {"pairs", paths.pairs},
                     {"pretrained_checkpoint", paths.pretrained_checkpoint},
                     {"pretrain_log", paths.pretrain_log},
                     {"finetuned_checkpoint", paths.finetuned_checkpoint},
                     {"docs", paths.docs},
                     {"train_queries", paths.train_queries},
                     {"test_queries", paths.test_queries},
                     {"train_candidates", paths.train_candidates},
                     {"test_candidates", paths.test_candidates},
                     {"qrels", paths.qrels},
                     {"run", paths.run},
                     {"metrics", paths.metrics}};
  j["corpus"] = ojson{{"min_words", min_words}, {"vocab_size", vocab_size}};
  j["encoder"] = ojson::parse(config_to_json(encoder).dump());
  j["encoder"].erase("vocab_size");
  j["taskgen"] = ojson{{"lambda", taskgen.lambda},
                       {"summary_tokens", taskgen.summary_tokens},
                       {"max_query_tokens", taskgen.max_query_tokens},
                       {"caps", per_task(taskgen.caps)},
                       {"budget", taskgen.budget}};
  j["warm"] = train_to_json(warm);
  j["pretrain"] = train_to_json(pretrain);
  j["pretrain"]["heldout_fraction"] = heldout_fraction;
  j["finetune"] = ojson{{"lr", finetune.lr},
                        {"epochs", finetune.epochs},
                        {"warmup", finetune.warmup},
                        {"batch_size", finetune.batch_size},
                        {"max_steps", finetune.max_steps},
                        {"reset_head", finetune.reset_head},
                        {"pairwise", finetune.pairwise}};
  j["rerank"] = ojson{{"depth", rerank_depth}};
  j["synthetic"] = ojson{{"seed", synthetic.seed},
                         {"topics", synthetic.topics},
                         {"pages_per_topic", synthetic.pages_per_topic},
                         {"short_pages", synthetic.short_pages},
                         {"ambiguous_titles", synthetic.ambiguous_titles},
                         {"topic_words", synthetic.topic_words},
                         {"signature_words", synthetic.signature_words},
                         {"body_paragraphs", synthetic.body_paragraphs},
                         {"paragraph_sentences", synthetic.paragraph_sentences},
                         {"same_topic_links", synthetic.same_topic_links},
                         {"train_queries", synthetic.train_queries},
                         {"test_queries", synthetic.test_queries},
                         {"candidates", synthetic.candidates},
                         {"same_topic_candidates", synthetic.same_topic_candidates}};
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& patch, const RunConfig& base) {
  nlohmann::json j = nlohmann::json::parse(base.to_json().dump());
  check_known(j, patch, "");
  j.merge_patch(patch);

  RunConfig c = base;
  c.profile = j.at("profile").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& p = j.at("paths");
  c.paths.work_dir = p.at("work_dir");
  c.paths.data_dir = p.at("data_dir");
  c.paths.raw_corpus = p.at("raw_corpus");
  c.paths.corpus = p.at("corpus");
  c.paths.corpus_index = p.at("corpus_index");
  c.paths.vocab = p.at("vocab");
  c.paths.stopwords = p.at("stopwords");
  c.paths.sampler_checkpoint = p.at("sampler_checkpoint");
  c.paths.pairs = p.at("pairs");
  c.paths.pretrained_checkpoint = p.at("pretrained_checkpoint");
  c.paths.pretrain_log = p.at("pretrain_log");
  c.paths.finetuned_checkpoint = p.at("finetuned_checkpoint");
  c.paths.docs = p.at("docs");
  c.paths.train_queries = p.at("train_queries");
  c.paths.test_queries = p.at("test_queries");
  c.paths.train_candidates = p.at("train_candidates");
  c.paths.test_candidates = p.at("test_candidates");
  c.paths.qrels = p.at("qrels");
  c.paths.run = p.at("run");
  c.paths.metrics = p.at("metrics");
  c.min_words = j.at("corpus").at("min_words");
  c.vocab_size = j.at("corpus").at("vocab_size");
  c.encoder = config_from_json(j.at("encoder"));
  const auto& t = j.at("taskgen");
  c.taskgen.lambda = t.at("lambda");
  c.taskgen.summary_tokens = t.at("summary_tokens");
  c.taskgen.max_query_tokens = t.at("max_query_tokens");
  c.taskgen.caps = per_task_from<std::size_t>(t.at("caps"));
  c.taskgen.budget = t.at("budget");
  c.warm = train_from_json(j.at("warm"));
  c.pretrain = train_from_json(j.at("pretrain"));
  c.heldout_fraction = j.at("pretrain").at("heldout_fraction");
  const auto& f = j.at("finetune");
  c.finetune.lr = f.at("lr");
  c.finetune.epochs = f.at("epochs");
  c.finetune.warmup = f.at("warmup");
  c.finetune.batch_size = f.at("batch_size");
  c.finetune.max_steps = f.at("max_steps");
  c.finetune.reset_head = f.at("reset_head");
  c.finetune.pairwise = f.at("pairwise");
  c.rerank_depth = j.at("rerank").at("depth");
  const auto& s = j.at("synthetic");
  c.synthetic.seed = s.at("seed");
  c.synthetic.topics = s.at("topics");
  c.synthetic.pages_per_topic = s.at("pages_per_topic");
  c.synthetic.short_pages = s.at("short_pages");
  c.synthetic.ambiguous_titles = s.at("ambiguous_titles");
  c.synthetic.topic_words = s.at("topic_words");
  c.synthetic.signature_words = s.at("signature_words");
  c.synthetic.body_paragraphs = s.at("body_paragraphs");
  c.synthetic.paragraph_sentences = s.at("paragraph_sentences");
  c.synthetic.same_topic_links = s.at("same_topic_links");
  c.synthetic.train_queries = s.at("train_queries");
  c.synthetic.test_queries = s.at("test_queries");
  c.synthetic.candidates = s.at("candidates");
  c.synthetic.same_topic_candidates = s.at("same_topic_candidates");
  c.derive_stage_seeds();
  return c;
}

void RunConfig::derive_stage_seeds() {
  taskgen.seed = derive_seed(seed, "taskgen");
  warm.seed = derive_seed(seed, "warm");
  pretrain.seed = derive_seed(seed, "pretrain");
  finetune.seed = derive_seed(seed, "finetune");
}

RunConfig resolve_run_config(const std::optional<std::string>& config_path,
                             const std::optional<std::string>& profile_override,
                             const std::optional<std::uint64_t>& seed_override) {
  nlohmann::json file = nlohmann::json::object();
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) throw Error("cannot open config '" + *config_path + "'");
    try {
      file = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error("config '" + *config_path + "': " + e.what());
    }
  }
  std::string profile = "toy";
  if (file.contains("profile")) profile = file["profile"].get<std::string>();
  if (profile_override) profile = *profile_override;
  if (!seed_override && !file.contains("seed")) throw Error("a seed is required (config 'seed' or --seed)");

  RunConfig config = RunConfig::from_json(file, RunConfig::for_profile(profile));
  config.profile = profile;
  if (seed_override) config.seed = *seed_override;
  if (config_path && fs::path(config.paths.work_dir).is_relative()) {
    // A relative work_dir in a config file is taken relative to that file.
    const auto base = fs::path(*config_path).parent_path();
    if (file.contains("paths") && file["paths"].contains("work_dir")) {
      config.paths.work_dir = (base / config.paths.work_dir).lexically_normal().string();
    }
  }
  config.derive_stage_seeds();
  return config;
}

ojson EvalReport::to_json() const {
  return ojson{{"MRR@10", mrr10},   {"MRR@100", mrr100},   {"nDCG@10", ndcg10},
               {"nDCG@100", ndcg100}, {"queries", queries}, {"unjudged_queries", unjudged_queries}};
}

EvalReport evaluate(const RankedRun& run, const Qrels& qrels) {
  EvalReport r;
  const auto m10 = mrr_at_k(run, qrels, 10);
  r.mrr10 = m10.value;
  r.mrr100 = mrr_at_k(run, qrels, 100).value;
  r.ndcg10 = ndcg_at_k(run, qrels, 10).value;
  r.ndcg100 = ndcg_at_k(run, qrels, 100).value;
  r.queries = run.queries.size();
  r.unjudged_queries = m10.unjudged_queries;
  return r;
}

std::string format_eval_table(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "metric     value\n"
                "MRR@10     %.4f\n"
                "MRR@100    %.4f\n"
                "nDCG@10    %.4f\n"
                "nDCG@100   %.4f\n"
                "queries    %zu\n",
                r.mrr10, r.mrr100, r.ndcg10, r.ndcg100, r.queries);
  return buf;
}

std::pair<std::vector<PretrainPair>, std::vector<PretrainPair>> split_heldout(std::vector<PretrainPair> pairs,
                                                                              double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw Error("held-out fraction must lie in [0, 1)");
  Rng rng = child_rng(seed, "heldout");
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const auto n_heldout = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pairs.size())));
  std::vector<PretrainPair> heldout(std::make_move_iterator(pairs.begin()),
                                    std::make_move_iterator(pairs.begin() + static_cast<std::ptrdiff_t>(n_heldout)));
  pairs.erase(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_heldout));
  return {std::move(pairs), std::move(heldout)};
}

RankedRun rerank_all(const Ranker& ranker, const QuerySet& queries, const CandidateLists& candidates,
                     const DocCollection& docs, std::size_t k, const std::string& tag) {
  RankedRun run;
  run.tag = tag;
  for (const auto& [qid, list] : candidates) {
    auto q = queries.find(qid);
    if (q == queries.end()) throw Error("candidates reference unknown query '" + qid + "'");
    if (list.empty()) continue;
    run.queries[qid] = rerank(ranker, q->second, list, docs, k);
  }
  return run;
}

void cmd_synth(const RunConfig& config, std::ostream& log) {
  announce(config, "synth", log);
  const auto data = generate_synthetic(config.synthetic);
  const auto dir = config.paths.resolve(config.paths.data_dir);
  write_synthetic(data, dir);
  log << "[synth] " << data.pages.size() << " pages, " << data.docs.size() << " documents, "
      << data.train_queries.size() << "+" << data.test_queries.size() << " queries -> " << dir << '\n';
}

void cmd_ingest(const RunConfig& config, std::ostream& log) {
  announce(config, "ingest", log);
  require(config, config.paths.raw_corpus, "raw corpus", "synth");
  const auto raw = load_corpus(config.paths.resolve(config.paths.raw_corpus));
  const auto clean = clean_corpus(raw, config.min_words);
  const auto vocab = build_vocab(clean, config.vocab_size);
  {
    auto out = open_output(config.paths.resolve(config.paths.corpus));
    write_corpus(clean, out);
  }
  {
    auto out = open_output(config.paths.resolve(config.paths.corpus_index));
    write_corpus_index(clean, out);
  }
  {
    auto out = open_output(config.paths.resolve(config.paths.vocab));
    vocab.write(out);
  }
  write_provenance(config, "ingest", config.paths.resolve(config.paths.corpus));
  log << "[ingest] kept " << clean.size() << " of " << raw.size() << " pages, " << clean.sentence_count()
      << " sentences, " << clean.anchor_count() << " anchors, vocabulary " << vocab.size() << '\n';
}

void cmd_warm_sampler(const RunConfig& config, std::ostream& log) {
  announce(config, "warm-sampler", log);
  const auto corpus = load_clean_corpus(config);
  const auto vocab = load_vocab(config);
  const auto stopwords = load_stopwords(config);
  // Bootstrap pairs: MLM needs packed inputs, which only need documents
  // and rough queries, so uniform attention stands in for the sampler.
  const UniformAttention uniform(static_cast<std::size_t>(config.encoder.max_len));
  TaskGenOptions options = config.taskgen;
  options.seed = derive_seed(config.seed, "bootstrap");
  const auto pairs = build_pairs(TaskContext{corpus, vocab, stopwords, uniform, options});
  const DocumentStore docs(corpus, vocab, config.taskgen.summary_tokens);
  const auto prepared = prepare_pairs(pairs, docs, vocab, static_cast<std::size_t>(config.encoder.max_len));
  log << "[warm-sampler] " << prepared.size() << " bootstrap pairs\n";
  train_and_save(config, config.warm, vocab, prepared, derive_seed(config.seed, "sampler-init"),
                 config.paths.sampler_checkpoint, "warm-sampler", log, nullptr, nullptr, nullptr);
}

PairBuildReport cmd_build_pairs(const RunConfig& config, std::ostream& log) {
  announce(config, "build-pairs", log);
  const auto corpus = load_clean_corpus(config);
  const auto stopwords = load_stopwords(config);
  require(config, config.paths.sampler_checkpoint, "sampler checkpoint", "warm-sampler");
  const auto ckpt = load_checkpoint(config.paths.resolve(config.paths.sampler_checkpoint));
  const Encoder sampler(ckpt.config, ckpt.params);
  const EncoderAttention attention(sampler);
  PairBuildReport report;
  const auto pairs = build_pairs(TaskContext{corpus, ckpt.vocab, stopwords, attention, config.taskgen}, &report);
  const auto path = config.paths.resolve(config.paths.pairs);
  {
    auto out = open_output(path);
    write_pairs(pairs, out);
  }
  write_provenance(config, "build-pairs", path);
  for (Task t : kAllTasks) {
    const auto i = task_index(t);
    log << "[build-pairs] " << task_name(t) << ": " << report.candidates[i] << " candidates, " << report.skipped[i]
        << " skipped, " << report.emitted[i] << " emitted\n";
  }
  log << "[build-pairs] " << pairs.size() << " pairs -> " << path << '\n';
  return report;
}

PretrainResult cmd_pretrain(const RunConfig& config, std::ostream& log) {
  announce(config, "pretrain", log);
  const auto corpus = load_clean_corpus(config);
  const auto vocab = load_vocab(config);
  require(config, config.paths.pairs, "pairs file", "build-pairs");
  auto [train_pairs, heldout_pairs] = split_heldout(read_pairs_file(config.paths.resolve(config.paths.pairs)),
                                                    config.heldout_fraction, config.pretrain.seed);
  const DocumentStore docs(corpus, vocab, config.taskgen.summary_tokens);
  const auto max_len = static_cast<std::size_t>(config.encoder.max_len);
  const auto prepared = prepare_pairs(train_pairs, docs, vocab, max_len);
  const auto heldout = prepare_pairs(heldout_pairs, docs, vocab, max_len);

  PretrainResult result;
  result.train_pairs = prepared.size();
  result.heldout_pairs = heldout.size();
  const auto log_path = config.paths.resolve(config.paths.pretrain_log);
  auto step_log = open_output(log_path);
  step_log << ojson{{"seed", config.seed}, {"config", config.to_json()}}.dump() << '\n';
  result.report = train_and_save(config, config.pretrain, vocab, prepared, derive_seed(config.seed, "init"),
                                 config.paths.pretrained_checkpoint, "pretrain", log, &step_log, &heldout, &result);
  log << "[pretrain] held-out pairwise accuracy " << std::fixed << std::setprecision(4) << result.heldout_accuracy
      << " over " << result.heldout_pairs << " pairs";
  for (Task t : kAllTasks) {
    const auto i = task_index(t);
    if (result.heldout_task_pairs[i] > 0) log << ' ' << task_name(t) << '=' << result.heldout_task_accuracy[i];
  }
  log << std::defaultfloat << '\n';
  return result;
}

FinetuneReport cmd_finetune(const RunConfig& config, std::ostream& log) {
  announce(config, "finetune", log);
  require(config, config.paths.pretrained_checkpoint, "pre-trained checkpoint", "pretrain");
  require(config, config.paths.docs, "document collection", "synth");
  require(config, config.paths.train_queries, "training queries", "synth");
  require(config, config.paths.train_candidates, "training candidates", "synth");
  require(config, config.paths.qrels, "qrels", "synth");
  const auto ckpt = load_checkpoint(config.paths.resolve(config.paths.pretrained_checkpoint));
  Ranker ranker = Ranker::from_checkpoint(ckpt);
  const auto docs = load_docs(config.paths.resolve(config.paths.docs));
  const auto examples = ranking_examples(load_queries(config.paths.resolve(config.paths.train_queries)),
                                         load_candidates(config.paths.resolve(config.paths.train_candidates)),
                                         load_qrels(config.paths.resolve(config.paths.qrels)));
  auto report = finetune(ranker, examples, docs, config.finetune);
  if (!report.step_losses.empty()) {
    log << "[finetune] " << examples.size() << " examples, " << report.steps << " steps, loss "
        << report.step_losses.front() << " -> " << report.step_losses.back() << '\n';
  }
  ojson meta{{"stage", "finetune"}, {"seed", config.seed}, {"config", config.to_json()}, {"steps", report.steps}};
  Checkpoint out{ckpt.config, ranker.encoder().params(), ckpt.vocab, std::nullopt, nlohmann::json::parse(meta.dump())};
  const auto path = config.paths.resolve(config.paths.finetuned_checkpoint);
  save_checkpoint(out, path);
  log << "[finetune] checkpoint " << path << '\n';
  return report;
}

void cmd_rerank(const RunConfig& config, std::ostream& log) {
  announce(config, "rerank", log);
  require(config, config.paths.finetuned_checkpoint, "fine-tuned checkpoint", "finetune");
  require(config, config.paths.test_queries, "test queries", "synth");
  require(config, config.paths.test_candidates, "test candidates", "synth");
  require(config, config.paths.docs, "document collection", "synth");
  const auto ckpt = load_checkpoint(config.paths.resolve(config.paths.finetuned_checkpoint));
  const Ranker ranker = Ranker::from_checkpoint(ckpt);
  const auto run = rerank_all(ranker, load_queries(config.paths.resolve(config.paths.test_queries)),
                              load_candidates(config.paths.resolve(config.paths.test_candidates)),
                              load_docs(config.paths.resolve(config.paths.docs)), config.rerank_depth,
                              "anchorpt-seed" + std::to_string(config.seed));
  const auto path = config.paths.resolve(config.paths.run);
  {
    auto out = open_output(path);
    write_run(run, out);
  }
  write_provenance(config, "rerank", path);
  log << "[rerank] " << run.queries.size() << " queries -> " << path << '\n';
}

EvalReport cmd_eval(const RunConfig& config, std::ostream& log) {
  announce(config, "eval", log);
  require(config, config.paths.run, "run file", "rerank");
  require(config, config.paths.qrels, "qrels", "synth");
  const auto report = evaluate(load_run(config.paths.resolve(config.paths.run)),
                               load_qrels(config.paths.resolve(config.paths.qrels)));
  for (const auto& q : report.unjudged_queries) log << "[eval] query '" << q << "' has no judgments; counted as 0\n";
  log << format_eval_table(report);
  ojson record = report.to_json();
  record["seed"] = config.seed;
  record["config"] = config.to_json();
  log << record.dump() << '\n';
  auto out = open_output(config.paths.resolve(config.paths.metrics));
  out << record.dump(2) << '\n';
  return report;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"synth",    "ingest",   "warm-sampler", "build-pairs",
                                                 "pretrain", "finetune", "rerank",       "eval"};
  return names;
}

void run_command(std::string_view name, const RunConfig& config, std::ostream& log) {
  if (name == "synth") return cmd_synth(config, log);
  if (name == "ingest") return cmd_ingest(config, log);
  if (name == "warm-sampler") return cmd_warm_sampler(config, log);
  if (name == "build-pairs") return void(cmd_build_pairs(config, log));
  if (name == "pretrain") return void(cmd_pretrain(config, log));
  if (name == "finetune") return void(cmd_finetune(config, log));
  if (name == "rerank") return cmd_rerank(config, log);
  if (name == "eval") return void(cmd_eval(config, log));
  if (name == "all") {
    for (const auto& n : command_names()) run_command(n, config, log);
    return;
  }
  throw Error("unknown command '" + std::string(name) + "'");
}

}  // namespace anchorpt
