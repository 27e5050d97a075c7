#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace coordfree {

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256.
Digest sha256(std::span<const std::uint8_t> bytes);
Digest sha256(std::string_view text);
std::string to_hex(const Digest& d);

}  // namespace coordfree
