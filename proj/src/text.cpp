#include "anchorpt/text.hpp"

#include <cctype>

namespace anchorpt {
namespace {

std::size_t sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte, treat as its own unit
}

}  // namespace

std::vector<std::size_t> code_point_offsets(std::string_view text) {
  std::vector<std::size_t> offsets;
  offsets.reserve(text.size() + 1);
  std::size_t i = 0;
  while (i < text.size()) {
    offsets.push_back(i);
    i += sequence_length(static_cast<unsigned char>(text[i]));
  }
  offsets.push_back(text.size());
  return offsets;
}

std::size_t count_code_points(std::string_view text) {
  return code_point_offsets(text).size() - 1;
}

std::vector<Token> tokenize_with_offsets(std::string_view text) {
  std::vector<Token> tokens;
  const auto offsets = code_point_offsets(text);
  const std::size_t n = offsets.size() - 1;
  Token current;
  bool open = false;
  for (std::size_t cp = 0; cp < n; ++cp) {
    const std::size_t b = offsets[cp];
    const std::size_t len = offsets[cp + 1] - b;
    const auto lead = static_cast<unsigned char>(text[b]);
    const bool word = lead >= 0x80 || std::isalnum(lead);
    if (word) {
      if (!open) {
        current = Token{{}, cp, cp};
        open = true;
      }
      if (len == 1) {
        current.text.push_back(static_cast<char>(std::tolower(lead)));
      } else {
        current.text.append(text.substr(b, len));
      }
      current.end = cp + 1;
    } else if (open) {
      tokens.push_back(std::move(current));
      open = false;
    }
  }
  if (open) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
  return out;
}

std::size_t count_whitespace_words(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_ascii_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

}  // namespace anchorpt
