#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "anchorpt/error.hpp"
#include "anchorpt/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Hyperlink-derived pre-training pairs, encoder pre-training and reranking"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::optional<std::string> profile;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  app.add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--profile", profile, "toy | full")->check(CLI::IsMember({"toy", "full"}));
  app.add_option("--seed", seed, "master seed (required unless the config sets one)");
  app.add_option("--out", out, "override the command's main output path");

  std::string command;
  const char* help[] = {
      "write the synthetic corpus and ranking data",
      "clean the raw corpus and build the vocabulary",
      "train the MLM-only sampler encoder",
      "construct the four-task pre-training pairs",
      "joint pairwise + MLM pre-training",
      "pointwise fine-tuning of the reranker",
      "rerank the test candidates",
      "MRR/nDCG of the run against the qrels",
  };
  const auto& names = anchorpt::command_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    app.add_subcommand(names[i], help[i])->fallthrough()->callback([&, i] { command = names[i]; });
  }
  app.add_subcommand("all", "run every stage in order")->fallthrough()->callback([&] { command = "all"; });

  CLI11_PARSE(app, argc, argv);

  try {
    auto config = anchorpt::resolve_run_config(config_path, profile, seed);
    if (out) {
      auto& p = config.paths;
      if (command == "synth") p.data_dir = *out;
      else if (command == "ingest") p.corpus = *out;
      else if (command == "warm-sampler") p.sampler_checkpoint = *out;
      else if (command == "build-pairs") p.pairs = *out;
      else if (command == "pretrain") p.pretrained_checkpoint = *out;
      else if (command == "finetune") p.finetuned_checkpoint = *out;
      else if (command == "rerank") p.run = *out;
      else if (command == "eval") p.metrics = *out;
      else throw anchorpt::Error("--out is not supported for '" + command + "'");
    }
    anchorpt::run_command(command, config, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "anchorpt " << command << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
