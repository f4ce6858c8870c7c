#include <doctest.h>

#include <cmath>
#include <map>

#include "anchorpt/corpus.hpp"
#include "anchorpt/sampler.hpp"
#include "anchorpt/stopwords.hpp"
#include "anchorpt/vocab.hpp"
#include "helpers.hpp"

using namespace anchorpt;

namespace {

TermDistribution dist_of(std::vector<std::pair<std::string, double>> weights) {
  std::vector<TermWeight> w;
  for (std::size_t i = 0; i < weights.size(); ++i) w.push_back({weights[i].first, weights[i].second, i});
  return normalize(w, {});
}

Vocabulary vocab_for(const HyperlinkCorpus& corpus) { return build_vocab(corpus, 100); }

}  // namespace

TEST_CASE("merge_position_weights") {
  const std::vector<double> alpha{0.1, 0.2, 0.3};
  const std::vector<std::string> tokens{"a", "b", "a"};
  const auto m = merge_position_weights(alpha, tokens);
  REQUIRE(m.size() == 2);
  CHECK(m[0].term == "a");
  CHECK(m[0].weight == doctest::Approx(0.4));
  CHECK(m[0].first_position == 0);
  CHECK(m[1].weight == doctest::Approx(0.2));

  const std::vector<std::string> distinct{"x", "y", "z"};
  const auto d = merge_position_weights(alpha, distinct);
  for (std::size_t i = 0; i < 3; ++i) CHECK(d[i].weight == alpha[i]);

  const std::vector<std::string> same{"q", "q", "q"};
  const auto s = merge_position_weights(alpha, same);
  REQUIRE(s.size() == 1);
  CHECK(s[0].weight == doctest::Approx(0.6));
}

TEST_CASE("normalize is a softmax over the kept terms") {
  const auto u = dist_of({{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}});
  for (const auto& t : u.terms) CHECK(t.probability == doctest::Approx(0.25));

  const auto shifted = dist_of({{"a", 1.5}, {"b", 0.2}, {"c", -3}});
  const auto base = dist_of({{"a", 11.5}, {"b", 10.2}, {"c", 7}});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(shifted.terms[i].probability == doctest::Approx(base.terms[i].probability).epsilon(1e-12));
  }

  const auto ab = dist_of({{"A", 1}, {"B", 0}});
  CHECK(ab.probability("A") == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)).epsilon(1e-12));
  CHECK(ab.probability("A") == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(ab.probability("missing") == 0.0);

  const std::vector<TermWeight> w{{"a", 1, 0}, {"b", 2, 1}};
  CHECK_THROWS_AS(normalize(w, TermSet{"a", "b"}), EmptySupportError);
  const auto kept = normalize(w, TermSet{"a"});
  REQUIRE(kept.support_size() == 1);
  CHECK(kept.terms[0].probability == 1.0);
}

TEST_CASE("anchor_term_distribution") {
  HyperlinkCorpus corpus({testing::page("s", "apple unveiled the new macbook pro laptop", {{"macbook pro", "m"}}),
                          testing::page("m", "A laptop.")});
  const auto vocab = vocab_for(corpus);
  const auto sw = StopwordList::english();
  const Sentence& sentence = corpus.find("s")->sentences.at(0);

  SUBCASE("uniform attention gives a uniform distribution over context terms") {
    UniformAttention uniform(64);
    const auto d = anchor_term_distribution(uniform, vocab, sw, sentence, 0);
    CHECK(d.support_size() == 4);  // apple unveiled new laptop
    for (const auto& t : d.terms) CHECK(t.probability == doctest::Approx(0.25));
    CHECK(d.probability("macbook") == 0.0);
    CHECK(d.probability("the") == 0.0);
    CHECK(d.total() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("peaked attention makes that term the most likely") {
    // positions: [CLS] apple unveiled the new macbook pro laptop [SEP]
    const auto peaked = testing::column_attention({0, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.6, 0.05});
    const auto d = anchor_term_distribution(peaked, vocab, sw, sentence, 0);
    for (const auto& t : d.terms) {
      if (t.term != "laptop") CHECK(t.probability < d.probability("laptop"));
    }
  }
}

TEST_CASE("cls_term_distribution") {
  HyperlinkCorpus corpus({testing::page("p", "macbook pro is a laptop made by apple")});
  const auto vocab = vocab_for(corpus);
  const auto sw = StopwordList::english();
  UniformAttention uniform(64);
  const auto& tokens = corpus.pages()[0].first_section;
  const auto d = cls_term_distribution(uniform, vocab, sw, tokens, TermSet{"macbook", "pro"});
  CHECK(d.probability("macbook") == 0.0);
  CHECK(d.probability("pro") == 0.0);
  CHECK(d.total() == doctest::Approx(1.0).epsilon(1e-9));

  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const auto drawn = draw_without_replacement(d, 1, rng);
    const auto& term = d.terms[drawn.at(0)].term;
    if (term == "macbook" || term == "pro") FAIL("excluded term drawn");
  }

  const std::vector<std::string> only_anchor{"macbook", "pro", "the", "a"};
  CHECK_THROWS_AS(cls_term_distribution(uniform, vocab, sw, only_anchor, TermSet{"macbook", "pro"}),
                  EmptySupportError);
}

TEST_CASE("first-draw frequencies match the distribution") {
  const auto d = dist_of({{"a", 0.3}, {"b", 1.2}, {"c", -0.4}, {"d", 0.0}, {"e", 0.9}});
  Rng rng(42);
  std::map<std::size_t, int> counts;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) ++counts[draw_without_replacement(d, 1, rng).at(0)];
  for (std::size_t k = 0; k < d.terms.size(); ++k) {
    CHECK(std::abs(counts[k] / static_cast<double>(trials) - d.terms[k].probability) < 0.01);
  }
}

TEST_CASE("zero-truncated Poisson") {
  const double lambda = 3.0;
  CHECK(lambda * std::exp(-lambda) == doctest::Approx(0.14936).epsilon(1e-4));
  Rng rng(7);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const int x = poisson_length(lambda, rng);
    REQUIRE(x >= 1);
    sum += x;
  }
  const double expected = lambda / (1.0 - std::exp(-lambda));
  CHECK(expected == doctest::Approx(3.1572).epsilon(1e-4));
  CHECK(std::abs(sum / n - expected) / expected < 0.01);
  CHECK_THROWS(poisson_length(0.0, rng));
}

TEST_CASE("sample_word_set") {
  Rng rng(3);
  std::vector<TermWeight> w{{"a", 50, 0}, {"b", -50, 1}, {"c", 50, 2}, {"d", -50, 3}};
  const auto two = normalize(w, {});
  const auto s = sample_word_set(two, 2, std::nullopt, rng);
  CHECK(s.terms == std::vector<std::string>{"a", "c"});
  CHECK_FALSE(s.support_exhausted);

  const auto big = sample_word_set(two, 9, std::string("macbook pro"), rng);
  CHECK(big.support_exhausted);
  CHECK(big.anchor_included);
  CHECK(big.terms.size() == 5);
  CHECK(big.terms.front() == "macbook pro");

  const auto d = dist_of({{"a", 0.3}, {"b", 1.2}, {"c", -0.4}, {"d", 0.0}, {"e", 0.9}});
  Rng r1(99), r2(99);
  CHECK(sample_word_set(d, 3, std::nullopt, r1).terms == sample_word_set(d, 3, std::nullopt, r2).terms);
}

TEST_CASE("uniform attention rows") {
  UniformAttention u(16);
  const std::vector<int> ids{2, 5, 6, 3}, seg(4, 0);
  const auto maps = u.attention(ids, seg);
  REQUIRE(maps.size() == 1);
  for (Eigen::Index r = 0; r < 4; ++r) CHECK(maps[0][0].row(r).sum() == doctest::Approx(1.0));
}
