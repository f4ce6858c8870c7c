#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace anchorpt {

class HyperlinkCorpus;

/// Word-level vocabulary with five reserved specials at ids 0-4.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecial = 5;

  static const std::vector<std::string>& special_terms();

  Vocabulary();
  /// `terms` lists every term in id order, starting with the specials.
  explicit Vocabulary(std::vector<std::string> terms);

  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::string& term(int id) const;

  std::optional<int> find(std::string_view term) const;
  /// Id of `term`, or kUnk when it is out of vocabulary.
  int id(std::string_view term) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);

  bool operator==(const Vocabulary& other) const { return terms_ == other.terms_; }

 private:
  std::vector<std::string> terms_;
  std::map<std::string, int, std::less<>> ids_;
};

/// Top `max_size` terms of the corpus titles and texts by frequency, ties
/// broken lexicographically, after the specials. Throws when max_size < 1.
Vocabulary build_vocab(const HyperlinkCorpus& corpus, std::size_t max_size);

}  // namespace anchorpt
