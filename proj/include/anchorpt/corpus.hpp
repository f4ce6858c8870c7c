#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace anchorpt {

/// A hyperlink occurrence. Offsets are half-open code-point offsets into the
/// owning text (page text for Page::anchors, sentence text for sentences).
struct AnchorSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;
  std::string target_id;

  bool operator==(const AnchorSpan&) const = default;
};

/// An anchor inside a sentence, mapped to the contiguous token range
/// [token_begin, token_end) that is treated as one phrase.
struct SentenceAnchor {
  AnchorSpan span;
  std::size_t token_begin = 0;
  std::size_t token_end = 0;

  /// Case-folded surface, tokens joined by single spaces.
  std::string normalized;
};

struct Sentence {
  std::string page_id;
  std::size_t index = 0;
  std::string text;
  std::vector<std::string> tokens;
  std::vector<SentenceAnchor> anchors;
};

struct Page {
  std::string id;
  std::string title;
  std::string url;
  std::string text;
  std::vector<AnchorSpan> anchors;

  // Derived on corpus construction.
  std::vector<Sentence> sentences;
  std::vector<std::string> first_section;
};

/// Immutable, id-sorted collection of pages. Safe to share across threads.
class HyperlinkCorpus {
 public:
  HyperlinkCorpus() = default;

  /// Sorts pages by id, rejects duplicate ids and derives sentences and
  /// first sections. Anchors whose target is absent are kept (pending).
  explicit HyperlinkCorpus(std::vector<Page> pages);

  const std::vector<Page>& pages() const { return pages_; }
  std::size_t size() const { return pages_.size(); }
  bool empty() const { return pages_.empty(); }

  const Page* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  std::size_t sentence_count() const;
  std::size_t anchor_count() const;

 private:
  std::vector<Page> pages_;
  std::unordered_map<std::string, std::size_t> index_;
};

bool operator==(const HyperlinkCorpus& a, const HyperlinkCorpus& b);

/// Reads one JSON record per line: {id, title, url, text, anchors:[{start,
/// end, surface, target_id}]}. Blank lines are skipped. Throws ParseError.
HyperlinkCorpus parse_corpus(std::istream& in, const std::string& source = "<corpus>");
HyperlinkCorpus load_corpus(const std::string& path);

void write_corpus(const HyperlinkCorpus& corpus, std::ostream& out);
/// Companion index: page ids, one per line, in iteration order.
void write_corpus_index(const HyperlinkCorpus& corpus, std::ostream& out);

/// Drops pages whose raw body has fewer than min_words whitespace words (or an
/// empty first section), then drops anchors whose target is not in the result.
HyperlinkCorpus clean_corpus(const HyperlinkCorpus& corpus, std::size_t min_words = 100);

/// Rule-based segmentation on '.', '!' or '?' followed by whitespace. A cut
/// that would fall strictly inside an anchor span is suppressed.
std::vector<Sentence> split_sentences(const Page& page);

/// Text up to the first blank line, else the first 10 sentences, tokenized.
std::vector<std::string> first_section_tokens(const Page& page);

/// First-section tokens truncated to max_tokens.
std::vector<std::string> page_summary(const Page& page, std::size_t max_tokens);

std::string normalize_surface(std::string_view surface);

struct AnchorOccurrence {
  std::string page_id;         // page containing the sentence
  std::size_t sentence_index = 0;
  std::size_t anchor_index = 0;  // position in Sentence::anchors
  std::string target_id;

  bool operator==(const AnchorOccurrence&) const = default;
};

/// Case-folded surface -> occurrences, deduplicated on (sentence, target).
using AnchorIndex = std::map<std::string, std::vector<AnchorOccurrence>, std::less<>>;

AnchorIndex anchor_occurrence_index(const HyperlinkCorpus& corpus);

}  // namespace anchorpt
