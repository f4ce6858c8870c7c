#include "anchorpt/stopwords.hpp"

#include <fstream>
#include <istream>

#include "anchorpt/error.hpp"
#include "anchorpt/text.hpp"

namespace anchorpt {

StopwordList StopwordList::english() {
  static const char* const kWords[] = {
      "a",   "an",   "and",  "are",  "as",   "at",    "be",   "by",   "for",  "from",
      "has", "have", "he",   "in",   "is",   "it",    "its",  "of",   "on",   "or",
      "she", "that", "the",  "their", "they", "this", "to",   "was",  "were", "which",
      "will", "with"};
  std::set<std::string, std::less<>> words;
  for (const char* w : kWords) words.emplace(w);
  return StopwordList(std::move(words));
}

StopwordList StopwordList::read(std::istream& in) {
  std::set<std::string, std::less<>> words;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (auto& t : tokenize(line)) words.insert(std::move(t));
  }
  return StopwordList(std::move(words));
}

StopwordList StopwordList::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stopword file '" + path + "'");
  return read(in);
}

}  // namespace anchorpt
