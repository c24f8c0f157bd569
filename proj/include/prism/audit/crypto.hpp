#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace prism::audit {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view data);
Digest hmac_sha256(std::string_view key, std::string_view data);

std::string to_hex(const Digest& d);
// Returns false for anything that is not exactly 64 hex characters.
bool from_hex(std::string_view hex, Digest& out);

// Constant-time comparison.
bool digest_equal(const Digest& a, const Digest& b);

inline constexpr Digest kZeroDigest{};

}  // namespace prism::audit
