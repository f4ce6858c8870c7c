#include "anchorpt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <tuple>

#include <json.hpp>

#include "anchorpt/error.hpp"
#include "anchorpt/text.hpp"

namespace anchorpt {
namespace {

constexpr std::size_t kFallbackSectionSentences = 10;

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

void derive(Page& page) {
  std::sort(page.anchors.begin(), page.anchors.end(),
            [](const AnchorSpan& a, const AnchorSpan& b) {
              return std::tie(a.start, a.end) < std::tie(b.start, b.end);
            });
  page.sentences = split_sentences(page);
  page.first_section = first_section_tokens(page);
}

std::string required_string(const nlohmann::json& record, const char* key,
                            const std::string& source, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end()) throw ParseError(source, line, std::string("missing field '") + key + "'");
  if (!it->is_string()) throw ParseError(source, line, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

HyperlinkCorpus::HyperlinkCorpus(std::vector<Page> pages) : pages_(std::move(pages)) {
  std::sort(pages_.begin(), pages_.end(),
            [](const Page& a, const Page& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < pages_.size(); ++i) {
    if (!index_.emplace(pages_[i].id, i).second) {
      throw Error("duplicate page id '" + pages_[i].id + "'");
    }
    derive(pages_[i]);
  }
}

const Page* HyperlinkCorpus::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &pages_[it->second];
}

std::size_t HyperlinkCorpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& p : pages_) n += p.sentences.size();
  return n;
}

std::size_t HyperlinkCorpus::anchor_count() const {
  std::size_t n = 0;
  for (const auto& p : pages_) n += p.anchors.size();
  return n;
}

bool operator==(const HyperlinkCorpus& a, const HyperlinkCorpus& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Page& x = a.pages()[i];
    const Page& y = b.pages()[i];
    if (x.id != y.id || x.title != y.title || x.url != y.url || x.text != y.text ||
        x.anchors != y.anchors) {
      return false;
    }
  }
  return true;
}

HyperlinkCorpus parse_corpus(std::istream& in, const std::string& source) {
  std::vector<Page> pages;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), is_ascii_space)) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) throw ParseError(source, line_no, "record must be a JSON object");

    Page page;
    page.id = required_string(record, "id", source, line_no);
    if (page.id.empty()) throw ParseError(source, line_no, "empty page id");
    page.title = required_string(record, "title", source, line_no);
    page.url = required_string(record, "url", source, line_no);
    page.text = required_string(record, "text", source, line_no);
    if (!seen.insert(page.id).second) {
      throw ParseError(source, line_no, "duplicate page id '" + page.id + "'");
    }

    const auto offsets = code_point_offsets(page.text);
    const std::size_t length = offsets.size() - 1;
    if (auto it = record.find("anchors"); it != record.end() && !it->is_null()) {
      if (!it->is_array()) throw ParseError(source, line_no, "'anchors' must be an array");
      for (const auto& a : *it) {
        AnchorSpan span;
        try {
          span.start = a.at("start").get<std::size_t>();
          span.end = a.at("end").get<std::size_t>();
          span.surface = a.at("surface").get<std::string>();
          span.target_id = a.at("target_id").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(source, line_no, std::string("bad anchor: ") + e.what());
        }
        if (span.start >= span.end || span.end > length) {
          throw ParseError(source, line_no,
                           "anchor offsets [" + std::to_string(span.start) + ", " +
                               std::to_string(span.end) + ") outside text of length " +
                               std::to_string(length));
        }
        const std::string_view slice(page.text.data() + offsets[span.start],
                                     offsets[span.end] - offsets[span.start]);
        if (normalize_surface(slice) != normalize_surface(span.surface)) {
          throw ParseError(source, line_no,
                           "anchor surface '" + span.surface + "' does not match text '" +
                               std::string(slice) + "'");
        }
        page.anchors.push_back(std::move(span));
      }
    }
    std::sort(page.anchors.begin(), page.anchors.end(),
              [](const AnchorSpan& a, const AnchorSpan& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < page.anchors.size(); ++i) {
      if (page.anchors[i].start < page.anchors[i - 1].end) {
        throw ParseError(source, line_no, "overlapping anchors in page '" + page.id + "'");
      }
    }
    pages.push_back(std::move(page));
  }
  return HyperlinkCorpus(std::move(pages));
}

HyperlinkCorpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file '" + path + "'");
  return parse_corpus(in, path);
}

void write_corpus(const HyperlinkCorpus& corpus, std::ostream& out) {
  for (const auto& page : corpus.pages()) {
    nlohmann::ordered_json record;
    record["id"] = page.id;
    record["title"] = page.title;
    record["url"] = page.url;
    record["text"] = page.text;
    auto anchors = nlohmann::ordered_json::array();
    for (const auto& a : page.anchors) {
      nlohmann::ordered_json j;
      j["start"] = a.start;
      j["end"] = a.end;
      j["surface"] = a.surface;
      j["target_id"] = a.target_id;
      anchors.push_back(std::move(j));
    }
    record["anchors"] = std::move(anchors);
    out << record.dump() << '\n';
  }
}

void write_corpus_index(const HyperlinkCorpus& corpus, std::ostream& out) {
  for (const auto& page : corpus.pages()) out << page.id << '\n';
}

HyperlinkCorpus clean_corpus(const HyperlinkCorpus& corpus, std::size_t min_words) {
  std::set<std::string, std::less<>> kept;
  for (const auto& page : corpus.pages()) {
    if (count_whitespace_words(page.text) >= min_words && !page.first_section.empty()) {
      kept.insert(page.id);
    }
  }
  std::vector<Page> pages;
  pages.reserve(kept.size());
  for (const auto& page : corpus.pages()) {
    if (!kept.contains(page.id)) continue;
    Page copy;
    copy.id = page.id;
    copy.title = page.title;
    copy.url = page.url;
    copy.text = page.text;
    for (const auto& a : page.anchors) {
      if (kept.contains(a.target_id)) copy.anchors.push_back(a);
    }
    pages.push_back(std::move(copy));
  }
  return HyperlinkCorpus(std::move(pages));
}

std::vector<Sentence> split_sentences(const Page& page) {
  const std::string& text = page.text;
  const auto offsets = code_point_offsets(text);
  const std::size_t n = offsets.size() - 1;
  auto char_at = [&](std::size_t cp) { return text[offsets[cp]]; };
  auto cut_inside_anchor = [&](std::size_t cut) {
    return std::any_of(page.anchors.begin(), page.anchors.end(),
                       [cut](const AnchorSpan& a) { return a.start < cut && cut < a.end; });
  };

  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t start = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (is_terminal(char_at(i)) && is_ascii_space(char_at(i + 1)) && !cut_inside_anchor(i + 1)) {
      ranges.emplace_back(start, i + 1);
      start = i + 1;
    }
  }
  ranges.emplace_back(start, n);

  std::vector<Sentence> sentences;
  for (auto [s, e] : ranges) {
    while (s < e && is_ascii_space(char_at(s))) ++s;
    while (e > s && is_ascii_space(char_at(e - 1))) --e;
    if (s >= e) continue;

    Sentence sentence;
    sentence.page_id = page.id;
    sentence.index = sentences.size();
    sentence.text = text.substr(offsets[s], offsets[e] - offsets[s]);
    const auto tokens = tokenize_with_offsets(sentence.text);
    sentence.tokens.reserve(tokens.size());
    for (const auto& t : tokens) sentence.tokens.push_back(t.text);

    for (const auto& a : page.anchors) {
      if (a.start < s || a.end > e) continue;
      SentenceAnchor anchor;
      anchor.span = a;
      anchor.span.start = a.start - s;
      anchor.span.end = a.end - s;
      std::size_t first = tokens.size(), last = 0;
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t].end > anchor.span.start && tokens[t].begin < anchor.span.end) {
          first = std::min(first, t);
          last = t + 1;
        }
      }
      if (first >= last) continue;  // punctuation-only anchor
      if (!sentence.anchors.empty() && first < sentence.anchors.back().token_end) continue;
      anchor.token_begin = first;
      anchor.token_end = last;
      std::vector<std::string> phrase(sentence.tokens.begin() + static_cast<std::ptrdiff_t>(first),
                                      sentence.tokens.begin() + static_cast<std::ptrdiff_t>(last));
      anchor.normalized = join(phrase, " ");
      sentence.anchors.push_back(std::move(anchor));
    }
    sentences.push_back(std::move(sentence));
  }
  return sentences;
}

std::vector<std::string> first_section_tokens(const Page& page) {
  const std::string& text = page.text;
  // Look for a whitespace-only line that follows some content.
  bool seen_content = false;
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    const std::string_view line(text.data() + line_start, line_end - line_start);
    const bool blank = std::all_of(line.begin(), line.end(), is_ascii_space);
    if (blank && seen_content) {
      return tokenize(std::string_view(text.data(), line_start));
    }
    if (!blank) seen_content = true;
    line_start = line_end + 1;
  }
  std::vector<std::string> tokens;
  const auto sentences = page.sentences.empty() ? split_sentences(page) : page.sentences;
  for (std::size_t i = 0; i < sentences.size() && i < kFallbackSectionSentences; ++i) {
    tokens.insert(tokens.end(), sentences[i].tokens.begin(), sentences[i].tokens.end());
  }
  return tokens;
}

std::vector<std::string> page_summary(const Page& page, std::size_t max_tokens) {
  const auto& section = page.first_section;
  const std::size_t n = std::min(max_tokens, section.size());
  return {section.begin(), section.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::string normalize_surface(std::string_view surface) { return join(tokenize(surface), " "); }

AnchorIndex anchor_occurrence_index(const HyperlinkCorpus& corpus) {
  AnchorIndex index;
  for (const auto& page : corpus.pages()) {
    for (const auto& sentence : page.sentences) {
      for (std::size_t a = 0; a < sentence.anchors.size(); ++a) {
        const auto& anchor = sentence.anchors[a];
        if (!corpus.contains(anchor.span.target_id)) continue;
        auto& entries = index[anchor.normalized];
        const bool duplicate = std::any_of(entries.begin(), entries.end(), [&](const AnchorOccurrence& o) {
          return o.page_id == page.id && o.sentence_index == sentence.index &&
                 o.target_id == anchor.span.target_id;
        });
        if (!duplicate) entries.push_back({page.id, sentence.index, a, anchor.span.target_id});
      }
    }
  }
  return index;
}

}  // namespace anchorpt
