#include "anchorpt/vocab.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "anchorpt/corpus.hpp"
#include "anchorpt/error.hpp"
#include "anchorpt/text.hpp"

namespace anchorpt {

const std::vector<std::string>& Vocabulary::special_terms() {
  static const std::vector<std::string> specials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  return specials;
}

Vocabulary::Vocabulary() : Vocabulary(special_terms()) {}

Vocabulary::Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
  const auto& specials = special_terms();
  if (terms_.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), terms_.begin())) {
    throw Error("vocabulary must begin with the special tokens");
  }
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!ids_.emplace(terms_[i], static_cast<int>(i)).second) {
      throw Error("duplicate vocabulary term '" + terms_[i] + "'");
    }
  }
}

const std::string& Vocabulary::term(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= terms_.size()) {
    throw Error("vocabulary id " + std::to_string(id) + " out of range");
  }
  return terms_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocabulary::find(std::string_view term) const {
  auto it = ids_.find(term);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id(std::string_view term) const { return find(term).value_or(kUnk); }

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

void Vocabulary::write(std::ostream& out) const {
  for (const auto& t : terms_) out << t << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) terms.push_back(line);
  }
  return Vocabulary(std::move(terms));
}

Vocabulary build_vocab(const HyperlinkCorpus& corpus, std::size_t max_size) {
  if (max_size < 1) throw Error("vocabulary max_size must be at least 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& page : corpus.pages()) {
    for (auto& t : tokenize(page.title)) ++counts[std::move(t)];
    for (auto& t : tokenize(page.text)) ++counts[std::move(t)];
  }
  const auto& specials = Vocabulary::special_terms();
  for (const auto& s : specials) counts.erase(s);

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);

  std::vector<std::string> terms = specials;
  for (auto& [term, count] : ranked) terms.push_back(std::move(term));
  return Vocabulary(std::move(terms));
}

}  // namespace anchorpt
