#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace prism::policy {

// IPv4 addresses are held in their v4-mapped IPv6 form so one range type
// covers both families.
struct IpAddress {
  std::array<std::uint8_t, 16> bytes{};
  bool v4 = false;

  std::string to_string() const;
};

// Accepts inet_aton-style IPv4 literals (1-4 parts, decimal/octal/hex) and
// RFC 4291 IPv6 text. Brackets are not accepted here.
std::optional<IpAddress> parse_ip(std::string_view text);

struct IpRange {
  IpAddress base;
  int prefix = 0;  // in IPv6 bits; IPv4 prefixes are stored +96
  std::string text;

  bool contains(const IpAddress& a) const;
};

// "10.0.0.0/8", "fc00::/7", or a bare address (full-length prefix).
std::optional<IpRange> parse_range(std::string_view text);

struct ParsedUrl {
  std::string scheme;
  std::string host;  // lower-case, brackets removed, trailing dot removed
  std::optional<int> port;
  std::string rest;
  bool host_is_bracketed = false;
};

std::optional<ParsedUrl> parse_url(std::string_view url);

}  // namespace prism::policy
