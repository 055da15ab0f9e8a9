#include "protolex/tokenize.hpp"

#include <array>
#include <cstdint>

namespace protolex {
namespace {

struct Decoded {
  char32_t cp;
  std::size_t len;
};

// Lenient UTF-8 decode; invalid bytes decode as themselves with length 1.
Decoded decode_at(std::string_view s, std::size_t i) {
  auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    int c1 = cont(1);
    if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0)
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
  }
  return {b0, 1};
}

bool is_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_punct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  static constexpr std::array<char32_t, 16> kUnicodePunct = {
      0x00A1, 0x00AB, 0x00BB, 0x00BF, 0x2010, 0x2011, 0x2012, 0x2013,
      0x2014, 0x2018, 0x2019, 0x201C, 0x201D, 0x2026, 0x3001, 0x3002};
  for (char32_t p : kUnicodePunct)
    if (p == cp) return true;
  return false;
}

// Start offsets of each code point in [begin, end).
std::vector<std::size_t> code_point_starts(std::string_view s, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> starts;
  for (std::size_t i = begin; i < end;) {
    starts.push_back(i);
    i += decode_at(s, i).len;
  }
  return starts;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    auto d = decode_at(text, i);
    if (is_space(d.cp)) {
      i += d.len;
      continue;
    }
    std::size_t piece_begin = i;
    while (i < text.size()) {
      d = decode_at(text, i);
      if (is_space(d.cp)) break;
      i += d.len;
    }
    std::size_t piece_end = i;

    auto starts = code_point_starts(text, piece_begin, piece_end);
    std::size_t lo = 0, hi = starts.size();
    while (lo < hi && is_punct(decode_at(text, starts[lo]).cp)) ++lo;
    while (hi > lo && is_punct(decode_at(text, starts[hi - 1]).cp)) --hi;
    if (lo == hi) continue;

    std::size_t b = starts[lo];
    std::size_t e = hi < starts.size() ? starts[hi] : piece_end;
    tokens.push_back({std::string(text.substr(b, e - b)), b, e});
  }
  return tokens;
}

std::string join_tokens(const std::vector<Token>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t.text;
  }
  return out;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

}  // namespace protolex
