#include "anchorpt/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "anchorpt/error.hpp"
#include "anchorpt/stopwords.hpp"
#include "anchorpt/text.hpp"
#include "anchorpt/vocab.hpp"

namespace anchorpt {
namespace {

TermSet terms_of(const Sentence& sentence, const SentenceAnchor& anchor) {
  TermSet out;
  for (std::size_t t = anchor.token_begin; t < anchor.token_end; ++t) out.insert(sentence.tokens[t]);
  return out;
}

TermSet terms_of(std::string_view surface) {
  TermSet out;
  for (auto& t : tokenize(surface)) out.insert(std::move(t));
  return out;
}

// Anchor surface followed by l context terms sampled from the sentence.
std::optional<WordSet> anchor_query(const TaskContext& ctx, const Sentence& sentence,
                                    std::size_t anchor_index, Rng& rng) {
  TermDistribution dist;
  try {
    dist = anchor_term_distribution(ctx.attention, ctx.vocab, ctx.stopwords, sentence, anchor_index);
  } catch (const EmptySupportError&) {
    return std::nullopt;
  }
  const auto l = static_cast<std::size_t>(poisson_length(ctx.options.lambda, rng));
  return sample_word_set(dist, l, sentence.anchors[anchor_index].normalized, rng);
}

// `count` terms sampled from the page summary by [CLS] attention.
std::optional<WordSet> page_query(const TaskContext& ctx, const Page& page, const TermSet& excluded,
                                  std::size_t count, const std::optional<std::string>& head, Rng& rng) {
  const auto summary = page_summary(page, ctx.options.summary_tokens);
  TermDistribution dist;
  try {
    dist = cls_term_distribution(ctx.attention, ctx.vocab, ctx.stopwords, summary, excluded);
  } catch (const EmptySupportError&) {
    return std::nullopt;
  }
  return sample_word_set(dist, count, head, rng);
}

}  // namespace

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kRqp: return "RQP";
    case Task::kQdm: return "QDM";
    case Task::kRdp: return "RDP";
    case Task::kAcm: return "ACM";
  }
  return "?";
}

Task parse_task(std::string_view name) {
  for (Task t : kAllTasks) {
    if (task_name(t) == name) return t;
  }
  throw Error("unknown task '" + std::string(name) + "'");
}

nlohmann::ordered_json pair_to_json(const PretrainPair& pair) {
  nlohmann::ordered_json j;
  j["task"] = task_name(pair.task);
  j["query"] = pair.query;
  j["pos_doc_id"] = pair.pos_doc_id;
  j["neg_doc_id"] = pair.neg_doc_id;
  j["neg_query"] = pair.neg_query;
  nlohmann::ordered_json prov;
  prov["page_id"] = pair.provenance.page_id;
  prov["sentence_index"] = pair.provenance.sentence_index;
  prov["anchors"] = pair.provenance.anchors;
  prov["importance"] = pair.provenance.importance;
  j["provenance"] = std::move(prov);
  j["seed_path"] = pair.seed_path;
  return j;
}

PretrainPair pair_from_json(const nlohmann::ordered_json& j) {
  PretrainPair p;
  p.task = parse_task(j.at("task").get<std::string>());
  p.query = j.at("query").get<std::vector<std::string>>();
  p.pos_doc_id = j.at("pos_doc_id").get<std::string>();
  p.neg_doc_id = j.at("neg_doc_id").get<std::string>();
  p.neg_query = j.value("neg_query", std::vector<std::string>{});
  if (auto it = j.find("provenance"); it != j.end()) {
    p.provenance.page_id = it->value("page_id", std::string{});
    p.provenance.sentence_index = it->value("sentence_index", std::size_t{0});
    p.provenance.anchors = it->value("anchors", std::vector<std::string>{});
    p.provenance.importance = it->value("importance", std::vector<double>{});
  }
  p.seed_path = j.value("seed_path", std::string{});
  if (p.query.empty()) throw Error("pair has an empty query");
  if (p.task == Task::kRqp && p.neg_query.empty()) throw Error("RQP pair lacks neg_query");
  if (p.task != Task::kRqp && p.pos_doc_id == p.neg_doc_id) {
    throw Error("pair has identical positive and negative documents");
  }
  return p;
}

void write_pairs(std::span<const PretrainPair> pairs, std::ostream& out) {
  for (const auto& p : pairs) out << pair_to_json(p).dump() << '\n';
}

std::vector<PretrainPair> read_pairs(std::istream& in, const std::string& source) {
  std::vector<PretrainPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), is_ascii_space)) continue;
    try {
      pairs.push_back(pair_from_json(nlohmann::ordered_json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return pairs;
}

std::vector<AnchorUnit> anchor_units(const HyperlinkCorpus& corpus, const Sentence& sentence,
                                     std::size_t token_limit) {
  std::vector<AnchorUnit> units;
  for (std::size_t a = 0; a < sentence.anchors.size(); ++a) {
    const auto& anchor = sentence.anchors[a];
    const auto& target = anchor.span.target_id;
    if (anchor.token_end > token_limit) continue;
    if (target == sentence.page_id || !corpus.contains(target)) continue;
    auto same_surface = std::find_if(units.begin(), units.end(),
                                     [&](const AnchorUnit& u) { return u.surface == anchor.normalized; });
    if (same_surface != units.end()) {
      if (same_surface->target_id == target) same_surface->occurrences.push_back(a);
      continue;
    }
    const bool target_taken = std::any_of(units.begin(), units.end(),
                                          [&](const AnchorUnit& u) { return u.target_id == target; });
    if (target_taken) continue;
    units.push_back({anchor.normalized, target, {a}});
  }
  return units;
}

std::vector<std::string> phrase_tokens(const Sentence& sentence) {
  std::vector<std::string> out;
  std::size_t next_anchor = 0;
  for (std::size_t t = 0; t < sentence.tokens.size();) {
    if (next_anchor < sentence.anchors.size() && sentence.anchors[next_anchor].token_begin == t) {
      out.push_back(sentence.anchors[next_anchor].normalized);
      t = sentence.anchors[next_anchor].token_end;
      ++next_anchor;
    } else {
      out.push_back(sentence.tokens[t]);
      ++t;
    }
  }
  return out;
}

std::optional<PretrainPair> build_rqp_pair(const TaskContext& ctx, const Sentence& sentence,
                                           std::size_t anchor_index, Rng& rng) {
  const auto& anchor = sentence.anchors.at(anchor_index);
  const Page* page = ctx.corpus.find(anchor.span.target_id);
  if (page == nullptr || page->id == sentence.page_id) return std::nullopt;
  if (anchor.token_end + 2 > ctx.attention.max_len()) return std::nullopt;

  auto positive = anchor_query(ctx, sentence, anchor_index, rng);
  if (!positive) return std::nullopt;
  // |S2| = |S1|: anchor plus the sampled context terms.
  auto negative = page_query(ctx, *page, terms_of(sentence, anchor), positive->terms.size(), std::nullopt, rng);
  if (!negative || negative->terms.size() != positive->terms.size()) return std::nullopt;

  PretrainPair pair;
  pair.task = Task::kRqp;
  pair.query = std::move(positive->terms);
  pair.neg_query = std::move(negative->terms);
  pair.pos_doc_id = page->id;
  pair.neg_doc_id = page->id;
  pair.provenance = {sentence.page_id, sentence.index, {anchor.normalized}, {}};
  return pair;
}

std::optional<PretrainPair> build_qdm_pair(const TaskContext& ctx, std::string_view surface,
                                           std::span<const AnchorOccurrence> occurrences, Rng& rng) {
  std::vector<AnchorOccurrence> usable;
  std::vector<std::string> destinations;
  for (const auto& o : occurrences) {
    if (o.page_id == o.target_id || !ctx.corpus.contains(o.target_id) || !ctx.corpus.contains(o.page_id)) {
      continue;
    }
    usable.push_back(o);
    if (std::find(destinations.begin(), destinations.end(), o.target_id) == destinations.end()) {
      destinations.push_back(o.target_id);
    }
  }
  if (destinations.size() < 2) return std::nullopt;

  const AnchorOccurrence& occ = usable[uniform_index(rng, usable.size())];
  const Page* page = ctx.corpus.find(occ.page_id);
  if (occ.sentence_index >= page->sentences.size()) return std::nullopt;
  const Sentence& sentence = page->sentences[occ.sentence_index];
  if (occ.anchor_index >= sentence.anchors.size()) return std::nullopt;
  if (sentence.anchors[occ.anchor_index].token_end + 2 > ctx.attention.max_len()) return std::nullopt;

  auto query = anchor_query(ctx, sentence, occ.anchor_index, rng);
  if (!query) return std::nullopt;

  std::vector<std::string> others;
  for (const auto& d : destinations) {
    if (d != occ.target_id) others.push_back(d);
  }
  PretrainPair pair;
  pair.task = Task::kQdm;
  pair.query = std::move(query->terms);
  pair.pos_doc_id = occ.target_id;
  pair.neg_doc_id = others[uniform_index(rng, others.size())];
  pair.provenance = {sentence.page_id, sentence.index, {std::string(surface)}, {}};
  return pair;
}

std::optional<PretrainPair> build_rdp_pair(const TaskContext& ctx, const Sentence& sentence, Rng& rng) {
  const std::size_t limit = std::min(sentence.tokens.size(), ctx.attention.max_len() - 2);
  auto units = anchor_units(ctx.corpus, sentence, limit);
  if (units.size() < 2) return std::nullopt;
  auto query = phrase_tokens(sentence);
  if (query.size() > ctx.options.max_query_tokens) return std::nullopt;

  const std::span<const std::string> body(sentence.tokens.data(), limit);
  const auto ids = sequence_ids(ctx.vocab, body);
  const std::vector<int> segments(ids.size(), 0);
  const auto attention = ctx.attention.attention(ids, segments);
  const std::size_t last = attention.size() - 1;

  // Importance of a unit: its occurrences' head-averaged attention toward
  // [CLS], summed over repeats, then a softmax over units.
  std::vector<TermWeight> weights;
  for (const auto& unit : units) {
    double eta = 0.0;
    for (std::size_t a : unit.occurrences) {
      const auto& anchor = sentence.anchors[a];
      std::vector<std::size_t> positions;
      for (std::size_t t = anchor.token_begin; t < anchor.token_end; ++t) positions.push_back(t + 1);
      eta += attention_from_position(attention, last, positions)[0];
    }
    weights.push_back({unit.surface, eta, sentence.anchors[unit.occurrences.front()].token_begin});
  }
  const TermDistribution importance = normalize(weights, {});
  const auto drawn = draw_without_replacement(importance, 2, rng);
  if (drawn.size() < 2) return std::nullopt;

  std::size_t pos = drawn[0], neg = drawn[1];
  const auto& a = importance.terms[pos];
  const auto& b = importance.terms[neg];
  if (b.probability > a.probability ||
      (b.probability == a.probability && b.first_position < a.first_position)) {
    std::swap(pos, neg);
  }
  PretrainPair pair;
  pair.task = Task::kRdp;
  pair.query = std::move(query);
  pair.pos_doc_id = units[pos].target_id;
  pair.neg_doc_id = units[neg].target_id;
  pair.provenance = {sentence.page_id,
                     sentence.index,
                     {units[pos].surface, units[neg].surface},
                     {importance.terms[pos].probability, importance.terms[neg].probability}};
  return pair;
}

std::optional<PretrainPair> build_acm_pair(const TaskContext& ctx, const Sentence& sentence, Rng& rng) {
  auto units = anchor_units(ctx.corpus, sentence, sentence.tokens.size());
  if (units.size() < 2) return std::nullopt;
  const std::size_t first = uniform_index(rng, units.size());
  std::size_t second = uniform_index(rng, units.size() - 1);
  if (second >= first) ++second;
  const AnchorUnit& a1 = units[first];
  const AnchorUnit& a2 = units[second];

  std::vector<const Page*> negatives;
  for (const auto& page : ctx.corpus.pages()) {
    if (page.id != a1.target_id && page.id != a2.target_id) negatives.push_back(&page);
  }
  if (negatives.empty()) return std::nullopt;

  const Page* p1 = ctx.corpus.find(a1.target_id);
  const auto l = static_cast<std::size_t>(poisson_length(ctx.options.lambda, rng));
  auto query = page_query(ctx, *p1, terms_of(a1.surface), l, a1.surface, rng);
  if (!query) return std::nullopt;

  PretrainPair pair;
  pair.task = Task::kAcm;
  pair.query = std::move(query->terms);
  pair.pos_doc_id = a2.target_id;
  pair.neg_doc_id = negatives[uniform_index(rng, negatives.size())]->id;
  pair.provenance = {sentence.page_id, sentence.index, {a1.surface, a2.surface}, {}};
  return pair;
}

std::vector<PretrainPair> mix_tasks(std::array<std::vector<PretrainPair>, kTaskCount> streams, Rng& rng,
                                    std::size_t budget) {
  std::array<std::size_t, kTaskCount> cursor{};
  std::vector<PretrainPair> mixed;
  std::vector<std::size_t> live;
  for (;;) {
    if (budget != 0 && mixed.size() >= budget) break;
    live.clear();
    for (std::size_t t = 0; t < kTaskCount; ++t) {
      if (cursor[t] < streams[t].size()) live.push_back(t);
    }
    if (live.empty()) break;
    const std::size_t t = live[uniform_index(rng, live.size())];
    mixed.push_back(std::move(streams[t][cursor[t]++]));
  }
  return mixed;
}

std::vector<PretrainPair> build_pairs(const TaskContext& ctx, PairBuildReport* report) {
  PairBuildReport local;
  PairBuildReport& r = report ? *report : local;
  r = PairBuildReport{};
  std::array<std::vector<PretrainPair>, kTaskCount> streams;
  const std::uint64_t seed = ctx.options.seed;

  auto emit = [&](Task task, std::optional<PretrainPair> pair, std::string path) {
    const std::size_t t = task_index(task);
    ++r.candidates[t];
    if (!pair) {
      ++r.skipped[t];
      return;
    }
    pair->seed_path = std::move(path);
    streams[t].push_back(std::move(*pair));
  };

  for (const auto& page : ctx.corpus.pages()) {
    for (const auto& sentence : page.sentences) {
      const std::string key = page.id + "/" + std::to_string(sentence.index);
      for (std::size_t a = 0; a < sentence.anchors.size(); ++a) {
        const auto& anchor = sentence.anchors[a];
        if (anchor.span.target_id == page.id || !ctx.corpus.contains(anchor.span.target_id)) continue;
        const std::string path = "RQP/" + key + "/" + std::to_string(a);
        Rng rng = child_rng(seed, path);
        emit(Task::kRqp, build_rqp_pair(ctx, sentence, a, rng), path);
      }
      if (anchor_units(ctx.corpus, sentence, sentence.tokens.size()).size() >= 2) {
        const std::string rdp_path = "RDP/" + key;
        Rng rdp_rng = child_rng(seed, rdp_path);
        emit(Task::kRdp, build_rdp_pair(ctx, sentence, rdp_rng), rdp_path);
        const std::string acm_path = "ACM/" + key;
        Rng acm_rng = child_rng(seed, acm_path);
        emit(Task::kAcm, build_acm_pair(ctx, sentence, acm_rng), acm_path);
      }
    }
  }

  const auto index = anchor_occurrence_index(ctx.corpus);
  for (const auto& [surface, occurrences] : index) {
    std::vector<std::string> destinations;
    std::size_t usable = 0;
    for (const auto& o : occurrences) {
      if (o.page_id == o.target_id) continue;
      ++usable;
      if (std::find(destinations.begin(), destinations.end(), o.target_id) == destinations.end()) {
        destinations.push_back(o.target_id);
      }
    }
    if (destinations.size() < 2) continue;
    for (std::size_t k = 0; k < usable; ++k) {
      const std::string path = "QDM/" + surface + "/" + std::to_string(k);
      Rng rng = child_rng(seed, path);
      emit(Task::kQdm, build_qdm_pair(ctx, surface, occurrences, rng), path);
    }
  }

  for (Task task : kAllTasks) {
    auto& stream = streams[task_index(task)];
    Rng shuffle = child_rng(seed, "shuffle/" + std::string(task_name(task)));
    std::shuffle(stream.begin(), stream.end(), shuffle);
    const std::size_t cap = ctx.options.caps[task_index(task)];
    if (cap != 0 && stream.size() > cap) stream.resize(cap);
  }
  Rng mix = child_rng(seed, "mix");
  auto mixed = mix_tasks(std::move(streams), mix, ctx.options.budget);
  for (const auto& p : mixed) ++r.emitted[task_index(p.task)];
  return mixed;
}

}  // namespace anchorpt
