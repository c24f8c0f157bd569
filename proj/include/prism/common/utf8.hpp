#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace prism::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

struct DecodedCodePoint {
  char32_t cp;
  std::uint32_t begin;  // byte offset in the source
  std::uint32_t end;
};

// Lossy decode: malformed or overlong sequences and surrogates become U+FFFD,
// one replacement per offending byte.
std::vector<DecodedCodePoint> decode(std::string_view bytes);

bool is_valid(std::string_view bytes);

void append(std::string& out, char32_t cp);

std::string encode(const std::vector<char32_t>& cps);

}  // namespace prism::utf8
