#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace prism::scan {

enum class Origin { user_message, prompt, tool_result, outbound, probe };

std::string_view to_string(Origin origin);

struct RawText {
  std::string content;
  Origin origin = Origin::probe;
};

enum class Transform : std::uint8_t {
  nfkc = 1U << 0,
  percent_decoded = 1U << 1,
  zero_width_stripped = 1U << 2,
  whitespace_collapsed = 1U << 3,
};

std::string_view to_string(Transform t);

class TransformSet {
 public:
  constexpr TransformSet() = default;

  constexpr void add(Transform t) { bits_ |= static_cast<std::uint8_t>(t); }
  constexpr bool contains(Transform t) const { return (bits_ & static_cast<std::uint8_t>(t)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }

  std::vector<std::string> names() const;

  friend constexpr bool operator==(TransformSet, TransformSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

struct CanonicalizationLimits {
  std::size_t max_input_bytes = 256 * 1024;
  int max_decode_passes = 2;
};

// Byte range [begin, end) in the original text.
struct SourceSpan {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
};

struct CanonicalText {
  std::string original;
  std::string normalized;
  TransformSet transforms;
  int decode_passes = 0;
  // One entry per byte of `normalized`: the original bytes it was derived from.
  std::vector<SourceSpan> source_map;

  // Maps a byte range of `normalized` back to `original`. Sets `exact` to false
  // when a boundary falls inside a transformed unit that also produced text
  // outside the range (e.g. half of an NFKC expansion).
  SourceSpan map_to_original(std::size_t begin, std::size_t end, bool& exact) const;
};

class InputTooLarge : public std::length_error {
 public:
  InputTooLarge(std::size_t size, std::size_t limit);
  std::size_t size() const { return size_; }
  std::size_t limit() const { return limit_; }

 private:
  std::size_t size_;
  std::size_t limit_;
};

// Zero-width strip, NFKC fold and bounded percent-decoding run to a fixed point,
// then whitespace runs collapse to one space. Escapes still present once the
// decode budget is spent lose their '%' so the output stays a fixed point.
CanonicalText canonicalize(const RawText& input, const CanonicalizationLimits& limits = {});

bool is_zero_width(char32_t cp);

}  // namespace prism::scan
