#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "anchorpt/encoder.hpp"
#include "anchorpt/error.hpp"
#include "anchorpt/rng.hpp"

namespace anchorpt {

struct Sentence;
class StopwordList;
class Vocabulary;

using TermSet = std::set<std::string, std::less<>>;

/// Source of attention maps for pseudo-query sampling.
class AttentionProvider {
 public:
  virtual ~AttentionProvider() = default;
  virtual AttentionMaps attention(std::span<const int> token_ids,
                                  std::span<const int> segment_ids) const = 0;
  virtual std::size_t max_len() const = 0;
};

/// Attention of a fixed encoder with dropout disabled.
class EncoderAttention final : public AttentionProvider {
 public:
  explicit EncoderAttention(const Encoder& encoder) : encoder_(encoder) {}
  AttentionMaps attention(std::span<const int> ids, std::span<const int> segments) const override {
    return encoder_.encode(ids, segments).attention;
  }
  std::size_t max_len() const override { return static_cast<std::size_t>(encoder_.config().max_len); }

 private:
  const Encoder& encoder_;
};

/// One layer, one head, uniform rows. Used to bootstrap before any sampler
/// checkpoint exists.
class UniformAttention final : public AttentionProvider {
 public:
  explicit UniformAttention(std::size_t max_len) : max_len_(max_len) {}
  AttentionMaps attention(std::span<const int> ids, std::span<const int>) const override;
  std::size_t max_len() const override { return max_len_; }

 private:
  std::size_t max_len_;
};

class EmptySupportError : public Error {
 public:
  using Error::Error;
};

struct TermWeight {
  std::string term;
  double weight = 0.0;
  std::size_t first_position = 0;
};

/// Sums per-position weights of identical tokens, ordered by first position.
std::vector<TermWeight> merge_position_weights(std::span<const double> alpha,
                                               std::span<const std::string> tokens);

enum class DistributionSource { kAnchor, kCls, kDirect };

struct TermProbability {
  std::string term;
  double probability = 0.0;
  std::size_t first_position = 0;
};

/// Probability over the distinct non-excluded terms of one sequence. Terms
/// outside `terms` have probability zero.
struct TermDistribution {
  std::vector<TermProbability> terms;  // ordered by first position
  DistributionSource source = DistributionSource::kDirect;
  std::string source_ref;

  double probability(std::string_view term) const;
  double total() const;
  std::size_t support_size() const { return terms.size(); }
};

/// Softmax of the weights over the terms not in `exclusions`. Throws
/// EmptySupportError when nothing remains.
TermDistribution normalize(std::span<const TermWeight> weights, const TermSet& exclusions);

/// Encoder input [CLS] tokens... [SEP] with segment 0 throughout.
std::vector<int> sequence_ids(const Vocabulary& vocab, std::span<const std::string> tokens);

/// Distribution over the sentence's context terms conditioned on one anchor,
/// read from the provider's last layer. The anchor's own terms, stopwords
/// and specials are excluded. Sentences beyond the provider's max_len are
/// truncated; throws when that cuts into the anchor.
TermDistribution anchor_term_distribution(const AttentionProvider& provider, const Vocabulary& vocab,
                                          const StopwordList& stopwords, const Sentence& sentence,
                                          std::size_t anchor_index);

/// Distribution over a page's terms read from the [CLS] attention row, with
/// `excluded_terms` (the anchor's terms) forced to zero.
TermDistribution cls_term_distribution(const AttentionProvider& provider, const Vocabulary& vocab,
                                       const StopwordList& stopwords,
                                       std::span<const std::string> page_tokens,
                                       const TermSet& excluded_terms);

/// Zero-truncated Poisson draw: resample until the value is at least 1.
int poisson_length(double lambda, Rng& rng);

/// Indices into dist.terms drawn without replacement, in draw order.
std::vector<std::size_t> draw_without_replacement(const TermDistribution& dist, std::size_t count,
                                                  Rng& rng);

struct WordSet {
  std::vector<std::string> terms;
  bool anchor_included = false;
  bool support_exhausted = false;  // fewer than l terms were available
};

/// l distinct terms by iterative renormalized draws, returned anchor first
/// (when given) and then in original position order.
WordSet sample_word_set(const TermDistribution& dist, std::size_t l,
                        const std::optional<std::string>& anchor_surface, Rng& rng);

}  // namespace anchorpt
