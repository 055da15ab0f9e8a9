#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace protolex {

// A word with its byte span [begin, end) in the original UTF-8 text.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

// Splits on Unicode whitespace, strips leading/trailing punctuation from
// each piece and drops pieces that end up empty. Word-internal punctuation
// ("rafael's", "ill-fated") is kept.
std::vector<Token> tokenize(std::string_view text);

// Words joined by single spaces.
std::string join_tokens(const std::vector<Token>& tokens);
std::string join_words(const std::vector<std::string>& words);

// ASCII lowercase; non-ASCII bytes pass through untouched.
std::string ascii_lower(std::string_view text);

}  // namespace protolex
