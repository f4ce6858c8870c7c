#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <string_view>

namespace anchorpt {

class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(std::set<std::string, std::less<>> words) : words_(std::move(words)) {}

  /// A short built-in English list (articles, pronouns, auxiliaries, prepositions).
  static StopwordList english();
  /// One term per line; '#' starts a comment; terms are lowercased.
  static StopwordList read(std::istream& in);
  static StopwordList load(const std::string& path);

  bool contains(std::string_view term) const { return words_.find(term) != words_.end(); }
  std::size_t size() const { return words_.size(); }
  const std::set<std::string, std::less<>>& words() const { return words_; }

 private:
  std::set<std::string, std::less<>> words_;
};

}  // namespace anchorpt
