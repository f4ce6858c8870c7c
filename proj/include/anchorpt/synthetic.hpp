#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "anchorpt/corpus.hpp"
#include "anchorpt/evalkit.hpp"
#include "anchorpt/ranker.hpp"

namespace anchorpt {

struct SyntheticOptions {
  std::size_t topics = 20;
  std::size_t pages_per_topic = 10;
  std::size_t short_pages = 10;       // below the cleaning threshold
  std::size_t ambiguous_titles = 10;  // titles shared by two pages of different topics
  std::size_t topic_words = 8;
  std::size_t signature_words = 3;
  std::size_t body_paragraphs = 3;
  std::size_t paragraph_sentences = 3;
  double same_topic_links = 0.8;  // share of body sentences about the page's own topic
  std::size_t train_queries = 50;
  std::size_t test_queries = 50;
  std::size_t candidates = 10;
  std::size_t same_topic_candidates = 4;
  std::uint64_t seed = 1;
};

/// Topic-clustered hyperlink corpus plus a small reranking benchmark over
/// the same pages. Every page opens with a summary paragraph that names its
/// title and signature words; each body sentence is about one topic, mostly
/// the page's own, links only into it and surrounds its anchors with words
/// of their targets.
struct SyntheticData {
  std::vector<Page> pages;  // raw, before cleaning
  DocCollection docs;
  QuerySet train_queries;
  QuerySet test_queries;
  CandidateLists train_candidates;
  CandidateLists test_candidates;
  Qrels qrels;  // covers both query sets
};

SyntheticData generate_synthetic(const SyntheticOptions& options);

/// Writes corpus.jsonl, docs.jsonl, queries.{train,test}.tsv,
/// candidates.{train,test}.txt and qrels.txt into `dir`.
void write_synthetic(const SyntheticData& data, const std::string& dir);

}  // namespace anchorpt
