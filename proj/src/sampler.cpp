#include "anchorpt/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "anchorpt/corpus.hpp"
#include "anchorpt/stopwords.hpp"
#include "anchorpt/vocab.hpp"

namespace anchorpt {
namespace {

TermSet base_exclusions(const StopwordList& stopwords) {
  TermSet out(stopwords.words().begin(), stopwords.words().end());
  for (const auto& s : Vocabulary::special_terms()) out.insert(s);
  return out;
}

std::vector<std::string> with_specials(std::span<const std::string> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size() + 2);
  out.emplace_back("[CLS]");
  out.insert(out.end(), tokens.begin(), tokens.end());
  out.emplace_back("[SEP]");
  return out;
}

}  // namespace

AttentionMaps UniformAttention::attention(std::span<const int> ids, std::span<const int>) const {
  const auto n = static_cast<Eigen::Index>(ids.size());
  Matrix uniform = Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  return AttentionMaps{{uniform}};
}

std::vector<TermWeight> merge_position_weights(std::span<const double> alpha,
                                               std::span<const std::string> tokens) {
  if (alpha.size() != tokens.size()) throw Error("weights and tokens differ in length");
  std::vector<TermWeight> merged;
  std::map<std::string_view, std::size_t> slot;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    auto [it, inserted] = slot.emplace(tokens[t], merged.size());
    if (inserted) {
      merged.push_back({tokens[t], alpha[t], t});
    } else {
      merged[it->second].weight += alpha[t];
    }
  }
  return merged;
}

double TermDistribution::probability(std::string_view term) const {
  for (const auto& t : terms) {
    if (t.term == term) return t.probability;
  }
  return 0.0;
}

double TermDistribution::total() const {
  double s = 0.0;
  for (const auto& t : terms) s += t.probability;
  return s;
}

TermDistribution normalize(std::span<const TermWeight> weights, const TermSet& exclusions) {
  TermDistribution dist;
  double max_weight = -std::numeric_limits<double>::infinity();
  for (const auto& w : weights) {
    if (exclusions.contains(w.term)) continue;
    dist.terms.push_back({w.term, w.weight, w.first_position});
    max_weight = std::max(max_weight, w.weight);
  }
  if (dist.terms.empty()) throw EmptySupportError("no terms left to sample after exclusions");
  double z = 0.0;
  for (auto& t : dist.terms) {
    t.probability = std::exp(t.probability - max_weight);
    z += t.probability;
  }
  for (auto& t : dist.terms) t.probability /= z;
  return dist;
}

std::vector<int> sequence_ids(const Vocabulary& vocab, std::span<const std::string> tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(Vocabulary::kCls);
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  ids.push_back(Vocabulary::kSep);
  return ids;
}

TermDistribution anchor_term_distribution(const AttentionProvider& provider, const Vocabulary& vocab,
                                          const StopwordList& stopwords, const Sentence& sentence,
                                          std::size_t anchor_index) {
  if (anchor_index >= sentence.anchors.size()) throw Error("anchor index out of range");
  const auto& anchor = sentence.anchors[anchor_index];
  const std::size_t budget = provider.max_len() - 2;
  const std::size_t kept = std::min(budget, sentence.tokens.size());
  if (anchor.token_end > kept) {
    throw Error("anchor '" + anchor.normalized + "' falls outside the truncated sentence");
  }
  const std::span<const std::string> body(sentence.tokens.data(), kept);
  const auto tokens = with_specials(body);
  const auto ids = sequence_ids(vocab, body);
  const std::vector<int> segments(ids.size(), 0);

  const auto attention = provider.attention(ids, segments);
  std::vector<std::size_t> positions;
  for (std::size_t t = anchor.token_begin; t < anchor.token_end; ++t) positions.push_back(t + 1);
  const auto alpha = attention_from_position(attention, attention.size() - 1, positions);

  TermSet exclusions = base_exclusions(stopwords);
  for (std::size_t t = anchor.token_begin; t < anchor.token_end; ++t) exclusions.insert(sentence.tokens[t]);
  auto dist = normalize(merge_position_weights(alpha, tokens), exclusions);
  dist.source = DistributionSource::kAnchor;
  dist.source_ref = sentence.page_id + "#" + std::to_string(sentence.index) + "/" + anchor.normalized;
  return dist;
}

TermDistribution cls_term_distribution(const AttentionProvider& provider, const Vocabulary& vocab,
                                       const StopwordList& stopwords,
                                       std::span<const std::string> page_tokens,
                                       const TermSet& excluded_terms) {
  const std::size_t kept = std::min(provider.max_len() - 2, page_tokens.size());
  const auto body = page_tokens.first(kept);
  const auto tokens = with_specials(body);
  const auto ids = sequence_ids(vocab, body);
  const std::vector<int> segments(ids.size(), 0);

  const auto attention = provider.attention(ids, segments);
  const std::size_t cls_position = 0;
  const auto alpha =
      attention_from_position(attention, attention.size() - 1, std::span<const std::size_t>(&cls_position, 1));

  TermSet exclusions = base_exclusions(stopwords);
  exclusions.insert(excluded_terms.begin(), excluded_terms.end());
  auto dist = normalize(merge_position_weights(alpha, tokens), exclusions);
  dist.source = DistributionSource::kCls;
  return dist;
}

int poisson_length(double lambda, Rng& rng) {
  if (!(lambda > 0.0)) throw Error("Poisson rate must be positive");
  std::poisson_distribution<int> poisson(lambda);
  for (;;) {
    const int x = poisson(rng);
    if (x >= 1) return x;
  }
}

std::vector<std::size_t> draw_without_replacement(const TermDistribution& dist, std::size_t count,
                                                  Rng& rng) {
  const std::size_t n = dist.terms.size();
  count = std::min(count, n);
  std::vector<double> weight(n);
  for (std::size_t i = 0; i < n; ++i) weight[i] = dist.terms[i].probability;
  std::vector<std::size_t> drawn;
  drawn.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    double total = 0.0;
    std::size_t last_live = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (weight[i] > 0.0) {
        total += weight[i];
        last_live = i;
      }
    }
    if (last_live == n) break;  // remaining terms carry no mass
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t pick = last_live;
    for (std::size_t i = 0; i < n; ++i) {
      if (weight[i] <= 0.0) continue;
      acc += weight[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    drawn.push_back(pick);
    weight[pick] = 0.0;
  }
  return drawn;
}

WordSet sample_word_set(const TermDistribution& dist, std::size_t l,
                        const std::optional<std::string>& anchor_surface, Rng& rng) {
  if (l < 1) throw Error("word set length must be at least 1");
  auto drawn = draw_without_replacement(dist, l, rng);
  std::sort(drawn.begin(), drawn.end(), [&](std::size_t a, std::size_t b) {
    return dist.terms[a].first_position < dist.terms[b].first_position;
  });
  WordSet set;
  set.support_exhausted = drawn.size() < l;
  if (anchor_surface) {
    set.terms.push_back(*anchor_surface);
    set.anchor_included = true;
  }
  for (std::size_t i : drawn) set.terms.push_back(dist.terms[i].term);
  return set;
}

}  // namespace anchorpt
