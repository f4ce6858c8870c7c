#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "anchorpt/corpus.hpp"
#include "anchorpt/rng.hpp"
#include "anchorpt/sampler.hpp"

namespace anchorpt {

class StopwordList;
class Vocabulary;

enum class Task { kRqp = 0, kQdm = 1, kRdp = 2, kAcm = 3 };
inline constexpr std::size_t kTaskCount = 4;
inline constexpr std::array<Task, kTaskCount> kAllTasks = {Task::kRqp, Task::kQdm, Task::kRdp, Task::kAcm};

std::string_view task_name(Task task);
Task parse_task(std::string_view name);
inline std::size_t task_index(Task task) { return static_cast<std::size_t>(task); }

struct PairProvenance {
  std::string page_id;
  std::size_t sentence_index = 0;
  std::vector<std::string> anchors;
  /// RDP only: sampling probability of the positive and negative anchor.
  std::vector<double> importance;

  bool operator==(const PairProvenance&) const = default;
};

/// One pairwise example. For RQP the document is shared (pos_doc_id ==
/// neg_doc_id) and the preference is between `query` and `neg_query`; the
/// other tasks compare `query` against two different documents.
struct PretrainPair {
  Task task = Task::kRqp;
  std::vector<std::string> query;
  std::string pos_doc_id;
  std::string neg_doc_id;
  std::vector<std::string> neg_query;
  PairProvenance provenance;
  std::string seed_path;

  bool operator==(const PretrainPair&) const = default;
};

nlohmann::ordered_json pair_to_json(const PretrainPair& pair);
PretrainPair pair_from_json(const nlohmann::ordered_json& j);
void write_pairs(std::span<const PretrainPair> pairs, std::ostream& out);
std::vector<PretrainPair> read_pairs(std::istream& in, const std::string& source = "<pairs>");

struct TaskGenOptions {
  double lambda = 3.0;
  std::size_t summary_tokens = 512;
  std::size_t max_query_tokens = 64;
  std::uint64_t seed = 0;
  std::array<std::size_t, kTaskCount> caps{};  // 0 = unlimited
  std::size_t budget = 0;                      // 0 = unlimited
};

struct TaskContext {
  const HyperlinkCorpus& corpus;
  const Vocabulary& vocab;
  const StopwordList& stopwords;
  const AttentionProvider& attention;
  TaskGenOptions options;
};

/// A sentence anchor after merging repeated surfaces: self-links, unresolved
/// targets and targets already claimed by an earlier surface are dropped.
struct AnchorUnit {
  std::string surface;
  std::string target_id;
  std::vector<std::size_t> occurrences;  // indices into Sentence::anchors
};

std::vector<AnchorUnit> anchor_units(const HyperlinkCorpus& corpus, const Sentence& sentence,
                                     std::size_t token_limit);

/// Sentence tokens with every anchor collapsed to its normalized surface.
std::vector<std::string> phrase_tokens(const Sentence& sentence);

// Builders return std::nullopt when the example must be skipped (self-link,
// empty support, too few anchors or destinations).
std::optional<PretrainPair> build_rqp_pair(const TaskContext& ctx, const Sentence& sentence,
                                           std::size_t anchor_index, Rng& rng);
std::optional<PretrainPair> build_qdm_pair(const TaskContext& ctx, std::string_view surface,
                                           std::span<const AnchorOccurrence> occurrences, Rng& rng);
std::optional<PretrainPair> build_rdp_pair(const TaskContext& ctx, const Sentence& sentence, Rng& rng);
std::optional<PretrainPair> build_acm_pair(const TaskContext& ctx, const Sentence& sentence, Rng& rng);

/// Interleaves the streams, picking each next task uniformly among the
/// streams that still have pairs. `budget` 0 means unlimited.
std::vector<PretrainPair> mix_tasks(std::array<std::vector<PretrainPair>, kTaskCount> streams,
                                    Rng& rng, std::size_t budget = 0);

struct PairBuildReport {
  std::array<std::size_t, kTaskCount> candidates{};
  std::array<std::size_t, kTaskCount> emitted{};
  std::array<std::size_t, kTaskCount> skipped{};
};

/// Runs all four builders over the corpus, applies caps and mixes.
std::vector<PretrainPair> build_pairs(const TaskContext& ctx, PairBuildReport* report = nullptr);

}  // namespace anchorpt
