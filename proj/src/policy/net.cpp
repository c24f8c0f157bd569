#include "prism/policy/net.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cctype>
#include <vector>

namespace prism::policy {

namespace {

std::optional<std::uint64_t> parse_number(std::string_view part) {
  if (part.empty()) return std::nullopt;
  int base = 10;
  if (part.size() > 1 && part[0] == '0' && (part[1] == 'x' || part[1] == 'X')) {
    base = 16;
    part.remove_prefix(2);
    if (part.empty()) return std::uint64_t{0};
  } else if (part.size() > 1 && part[0] == '0') {
    base = 8;
    part.remove_prefix(1);
  }
  std::uint64_t v = 0;
  for (char c : part) {
    int d = -1;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    if (d < 0 || d >= base) return std::nullopt;
    v = v * static_cast<std::uint64_t>(base) + static_cast<std::uint64_t>(d);
    if (v > 0xFFFFFFFFULL) return std::nullopt;
  }
  return v;
}

std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
  std::vector<std::uint64_t> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = text.find('.', start);
    const auto part = text.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    const auto v = parse_number(part);
    if (!v) return std::nullopt;
    parts.push_back(*v);
    if (dot == std::string_view::npos) break;
    start = dot + 1;
    if (parts.size() == 4) return std::nullopt;
  }
  // a, a.b (b 24 bits), a.b.c (c 16 bits), a.b.c.d
  const std::size_t n = parts.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (parts[i] > 0xFF) return std::nullopt;
  }
  const int tail_bits = 8 * static_cast<int>(5 - n);
  if (tail_bits < 32 && parts.back() >= (1ULL << tail_bits)) return std::nullopt;
  std::uint32_t v = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) v |= static_cast<std::uint32_t>(parts[i]) << (24 - 8 * i);
  v |= static_cast<std::uint32_t>(parts.back());
  return v;
}

IpAddress from_v4(std::uint32_t v) {
  IpAddress a;
  a.v4 = true;
  a.bytes[10] = 0xFF;
  a.bytes[11] = 0xFF;
  a.bytes[12] = static_cast<std::uint8_t>(v >> 24);
  a.bytes[13] = static_cast<std::uint8_t>(v >> 16);
  a.bytes[14] = static_cast<std::uint8_t>(v >> 8);
  a.bytes[15] = static_cast<std::uint8_t>(v);
  return a;
}

bool is_v4_mapped(const std::array<std::uint8_t, 16>& b) {
  for (int i = 0; i < 10; ++i) {
    if (b[i] != 0) return false;
  }
  return b[10] == 0xFF && b[11] == 0xFF;
}

}  // namespace

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN] = {};
  if (v4) {
    ::inet_ntop(AF_INET, bytes.data() + 12, buf, sizeof(buf));
  } else {
    ::inet_ntop(AF_INET6, bytes.data(), buf, sizeof(buf));
  }
  return buf;
}

std::optional<IpAddress> parse_ip(std::string_view text) {
  if (text.empty() || text.size() > 64) return std::nullopt;
  if (text.find(':') != std::string_view::npos) {
    std::string s(text);
    IpAddress a;
    if (::inet_pton(AF_INET6, s.c_str(), a.bytes.data()) != 1) return std::nullopt;
    a.v4 = is_v4_mapped(a.bytes);
    return a;
  }
  if (const auto v4 = parse_ipv4(text)) return from_v4(*v4);
  return std::nullopt;
}

bool IpRange::contains(const IpAddress& a) const {
  int bits = prefix;
  for (std::size_t i = 0; i < 16 && bits > 0; ++i, bits -= 8) {
    const std::uint8_t mask = bits >= 8 ? 0xFF : static_cast<std::uint8_t>(0xFF << (8 - bits));
    if ((a.bytes[i] & mask) != (base.bytes[i] & mask)) return false;
  }
  return true;
}

std::optional<IpRange> parse_range(std::string_view text) {
  IpRange r;
  r.text = std::string(text);
  const auto slash = text.find('/');
  const auto addr = parse_ip(text.substr(0, slash));
  if (!addr) return std::nullopt;
  r.base = *addr;
  const int max_bits = addr->v4 ? 32 : 128;
  int bits = max_bits;
  if (slash != std::string_view::npos) {
    const auto p = text.substr(slash + 1);
    if (p.empty() || p.size() > 3 || !std::all_of(p.begin(), p.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return std::nullopt;
    }
    bits = std::stoi(std::string(p));
    if (bits > max_bits) return std::nullopt;
  }
  r.prefix = addr->v4 ? bits + 96 : bits;
  return r;
}

std::optional<ParsedUrl> parse_url(std::string_view url) {
  for (unsigned char c : url) {
    if (c <= 0x20 || c == 0x7F) return std::nullopt;
  }
  const auto sep = url.find("://");
  if (sep == std::string_view::npos || sep == 0) return std::nullopt;
  ParsedUrl out;
  for (char c : url.substr(0, sep)) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') return std::nullopt;
    out.scheme.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  std::string_view rest = url.substr(sep + 3);
  const auto end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, end);
  out.rest = end == std::string_view::npos ? "" : std::string(rest.substr(end));
  if (const auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);
  if (authority.empty()) return std::nullopt;

  std::string_view host;
  std::string_view port;
  if (authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    host = authority.substr(1, close - 1);
    const auto after = authority.substr(close + 1);
    if (!after.empty()) {
      if (after.front() != ':') return std::nullopt;
      port = after.substr(1);
    }
    out.host_is_bracketed = true;
    if (!parse_ip(host) || host.find(':') == std::string_view::npos) return std::nullopt;
  } else {
    const auto colon = authority.find(':');
    host = authority.substr(0, colon);
    if (colon != std::string_view::npos) port = authority.substr(colon + 1);
  }
  if (host.empty()) return std::nullopt;
  if (!port.empty()) {
    if (port.size() > 5 || !std::all_of(port.begin(), port.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return std::nullopt;
    }
    const int p = std::stoi(std::string(port));
    if (p > 65535) return std::nullopt;
    out.port = p;
  }
  for (char c : host) {
    const auto u = static_cast<unsigned char>(c);
    if (!out.host_is_bracketed && !(std::isalnum(u) || c == '-' || c == '.' || c == '_' || u >= 0x80)) {
      return std::nullopt;
    }
    out.host.push_back(static_cast<char>(std::tolower(u)));
  }
  while (!out.host.empty() && out.host.back() == '.') out.host.pop_back();
  if (out.host.empty()) return std::nullopt;
  return out;
}

}  // namespace prism::policy
