#include "prism/scan/canonicalize.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <stdexcept>

#include "prism/common/utf8.hpp"

namespace prism::scan {

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::user_message: return "user_message";
    case Origin::prompt: return "prompt";
    case Origin::tool_result: return "tool_result";
    case Origin::outbound: return "outbound";
    case Origin::probe: return "probe";
  }
  return "probe";
}

std::string_view to_string(Transform t) {
  switch (t) {
    case Transform::nfkc: return "nfkc";
    case Transform::percent_decoded: return "percent_decoded";
    case Transform::zero_width_stripped: return "zero_width_stripped";
    case Transform::whitespace_collapsed: return "whitespace_collapsed";
  }
  return "";
}

std::vector<std::string> TransformSet::names() const {
  std::vector<std::string> out;
  for (Transform t : {Transform::nfkc, Transform::percent_decoded, Transform::zero_width_stripped,
                      Transform::whitespace_collapsed}) {
    if (contains(t)) out.emplace_back(to_string(t));
  }
  return out;
}

InputTooLarge::InputTooLarge(std::size_t size, std::size_t limit)
    : std::length_error("input of " + std::to_string(size) + " bytes exceeds the " + std::to_string(limit) +
                        "-byte canonicalization limit"),
      size_(size),
      limit_(limit) {}

bool is_zero_width(char32_t cp) {
  return (cp >= 0x200B && cp <= 0x200D) || cp == 0x2060 || cp == 0xFEFF;
}

namespace {

struct Piece {
  char32_t cp;
  std::uint32_t begin;
  std::uint32_t end;
};

using Pieces = std::vector<Piece>;

const icu::Normalizer2& nfkc_instance() {
  static const icu::Normalizer2* instance = [] {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFKCInstance(status);
    if (U_FAILURE(status) || n == nullptr) throw std::runtime_error("ICU NFKC normalizer unavailable");
    return n;
  }();
  return *instance;
}

bool strip_zero_width(Pieces& pieces) {
  const auto it = std::remove_if(pieces.begin(), pieces.end(), [](const Piece& p) { return is_zero_width(p.cp); });
  if (it == pieces.end()) return false;
  pieces.erase(it, pieces.end());
  return true;
}

icu::UnicodeString to_unicode(const Pieces& pieces, std::size_t from, std::size_t to) {
  icu::UnicodeString s;
  for (std::size_t i = from; i < to; ++i) s.append(static_cast<UChar32>(pieces[i].cp));
  return s;
}

bool apply_nfkc(Pieces& pieces) {
  const icu::Normalizer2& nfkc = nfkc_instance();
  UErrorCode status = U_ZERO_ERROR;
  if (nfkc.isNormalized(to_unicode(pieces, 0, pieces.size()), status) && U_SUCCESS(status)) return false;

  Pieces out;
  out.reserve(pieces.size());
  std::size_t seg_start = 0;
  auto flush = [&](std::size_t seg_end) {
    if (seg_start >= seg_end) return;
    if (seg_end - seg_start == 1 && nfkc.isInert(static_cast<UChar32>(pieces[seg_start].cp))) {
      out.push_back(pieces[seg_start]);
      return;
    }
    const icu::UnicodeString src = to_unicode(pieces, seg_start, seg_end);
    UErrorCode st = U_ZERO_ERROR;
    const icu::UnicodeString dst = nfkc.normalize(src, st);
    if (U_FAILURE(st)) throw std::runtime_error("NFKC normalization failed");
    if (dst == src) {
      out.insert(out.end(), pieces.begin() + static_cast<std::ptrdiff_t>(seg_start),
                 pieces.begin() + static_cast<std::ptrdiff_t>(seg_end));
      return;
    }
    std::uint32_t b = pieces[seg_start].begin;
    std::uint32_t e = pieces[seg_start].end;
    for (std::size_t i = seg_start; i < seg_end; ++i) {
      b = std::min(b, pieces[i].begin);
      e = std::max(e, pieces[i].end);
    }
    for (int32_t i = 0; i < dst.length();) {
      const UChar32 cp = dst.char32At(i);
      out.push_back({static_cast<char32_t>(cp), b, e});
      i += U16_LENGTH(cp);
    }
  };
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i > seg_start && nfkc.hasBoundaryBefore(static_cast<UChar32>(pieces[i].cp))) {
      flush(i);
      seg_start = i;
    }
  }
  flush(pieces.size());
  pieces.swap(out);
  return true;
}

int hex_value(char32_t cp) {
  if (cp >= '0' && cp <= '9') return static_cast<int>(cp - '0');
  if (cp >= 'a' && cp <= 'f') return static_cast<int>(cp - 'a' + 10);
  if (cp >= 'A' && cp <= 'F') return static_cast<int>(cp - 'A' + 10);
  return -1;
}

bool is_escape_at(const Pieces& pieces, std::size_t i) {
  return i + 2 < pieces.size() && pieces[i].cp == '%' && hex_value(pieces[i + 1].cp) >= 0 &&
         hex_value(pieces[i + 2].cp) >= 0;
}

bool has_escape(const Pieces& pieces) {
  for (std::size_t i = 0; i + 2 < pieces.size(); ++i) {
    if (is_escape_at(pieces, i)) return true;
  }
  return false;
}

// One decoding pass. Consecutive escapes decode together so multi-byte UTF-8
// sequences survive; bytes that do not form valid UTF-8 become U+FFFD.
void percent_decode_pass(Pieces& pieces) {
  Pieces out;
  out.reserve(pieces.size());
  std::size_t i = 0;
  while (i < pieces.size()) {
    if (!is_escape_at(pieces, i)) {
      out.push_back(pieces[i]);
      ++i;
      continue;
    }
    std::string bytes;
    std::vector<SourceSpan> byte_sources;
    while (is_escape_at(pieces, i)) {
      const int v = hex_value(pieces[i + 1].cp) * 16 + hex_value(pieces[i + 2].cp);
      bytes.push_back(static_cast<char>(v));
      byte_sources.push_back({std::min({pieces[i].begin, pieces[i + 1].begin, pieces[i + 2].begin}),
                              std::max({pieces[i].end, pieces[i + 1].end, pieces[i + 2].end})});
      i += 3;
    }
    for (const auto& d : utf8::decode(bytes)) {
      std::uint32_t b = byte_sources[d.begin].begin;
      std::uint32_t e = byte_sources[d.begin].end;
      for (std::uint32_t k = d.begin; k < d.end; ++k) {
        b = std::min(b, byte_sources[k].begin);
        e = std::max(e, byte_sources[k].end);
      }
      out.push_back({d.cp, b, e});
    }
  }
  pieces.swap(out);
}

void neutralize_escapes(Pieces& pieces) {
  while (has_escape(pieces)) {
    Pieces out;
    out.reserve(pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (is_escape_at(pieces, i)) continue;  // drop the '%', keep the digits
      out.push_back(pieces[i]);
    }
    pieces.swap(out);
  }
}

bool collapse_whitespace(Pieces& pieces) {
  Pieces out;
  out.reserve(pieces.size());
  bool changed = false;
  std::size_t i = 0;
  while (i < pieces.size()) {
    if (!u_isUWhiteSpace(static_cast<UChar32>(pieces[i].cp))) {
      out.push_back(pieces[i]);
      ++i;
      continue;
    }
    std::size_t j = i;
    std::uint32_t b = pieces[i].begin;
    std::uint32_t e = pieces[i].end;
    while (j < pieces.size() && u_isUWhiteSpace(static_cast<UChar32>(pieces[j].cp))) {
      b = std::min(b, pieces[j].begin);
      e = std::max(e, pieces[j].end);
      ++j;
    }
    if (j - i > 1 || pieces[i].cp != U' ') changed = true;
    out.push_back({U' ', b, e});
    i = j;
  }
  if (changed) pieces.swap(out);
  return changed;
}

}  // namespace

SourceSpan CanonicalText::map_to_original(std::size_t begin, std::size_t end, bool& exact) const {
  exact = true;
  if (source_map.empty() || begin >= end) return {0, 0};
  end = std::min(end, source_map.size());
  begin = std::min(begin, end - 1);
  SourceSpan span = source_map[begin];
  for (std::size_t k = begin; k < end; ++k) {
    span.begin = std::min(span.begin, source_map[k].begin);
    span.end = std::max(span.end, source_map[k].end);
  }
  auto overlaps = [](SourceSpan a, SourceSpan b) { return a.begin < b.end && b.begin < a.end; };
  if (begin > 0 && overlaps(source_map[begin - 1], source_map[begin])) exact = false;
  if (end < source_map.size() && overlaps(source_map[end], source_map[end - 1])) {
    // continuation bytes of one code point share a span; only a new code point counts
    const auto lead = static_cast<unsigned char>(normalized[end]);
    if ((lead & 0xC0) != 0x80) exact = false;
  }
  return span;
}

CanonicalText canonicalize(const RawText& input, const CanonicalizationLimits& limits) {
  if (input.content.size() > limits.max_input_bytes) {
    throw InputTooLarge(input.content.size(), limits.max_input_bytes);
  }
  CanonicalText result;
  result.original = input.content;

  Pieces pieces;
  const auto decoded = utf8::decode(input.content);
  pieces.reserve(decoded.size());
  for (const auto& d : decoded) pieces.push_back({d.cp, d.begin, d.end});

  constexpr int kMaxRounds = 32;
  for (int round = 0; round < kMaxRounds; ++round) {
    bool changed = false;
    if (strip_zero_width(pieces)) {
      result.transforms.add(Transform::zero_width_stripped);
      changed = true;
    }
    if (apply_nfkc(pieces)) {
      result.transforms.add(Transform::nfkc);
      changed = true;
    }
    if (has_escape(pieces)) {
      if (result.decode_passes < limits.max_decode_passes) {
        percent_decode_pass(pieces);
        ++result.decode_passes;
      } else {
        neutralize_escapes(pieces);
      }
      result.transforms.add(Transform::percent_decoded);
      changed = true;
    }
    if (!changed) break;
  }
  if (collapse_whitespace(pieces)) result.transforms.add(Transform::whitespace_collapsed);

  result.normalized.reserve(pieces.size());
  result.source_map.reserve(pieces.size());
  for (const Piece& p : pieces) {
    const std::size_t before = result.normalized.size();
    utf8::append(result.normalized, p.cp);
    for (std::size_t k = before; k < result.normalized.size(); ++k) result.source_map.push_back({p.begin, p.end});
  }
  return result;
}

}  // namespace prism::scan
