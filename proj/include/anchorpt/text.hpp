#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace anchorpt {

/// A lowercased word token with its code-point span in the source text.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Word characters are ASCII letters/digits and any non-ASCII code point;
// whitespace and ASCII punctuation separate tokens and are dropped.
std::vector<Token> tokenize_with_offsets(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);

/// Byte offset of every code point, plus a trailing entry for text.size().
std::vector<std::size_t> code_point_offsets(std::string_view text);
std::size_t count_code_points(std::string_view text);

std::size_t count_whitespace_words(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace anchorpt
