#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace condforge {

/// 128-bit content hash of a file's bytes; the stable record id.
struct ContentId {
  std::array<std::uint8_t, 16> bytes{};

  std::string hex() const;
  static ContentId from_hex(std::string_view hex);

  auto operator<=>(const ContentId&) const = default;
};

ContentId content_id(std::span<const std::uint8_t> data);

std::string base64_encode(std::span<const std::uint8_t> data);
/// Throws Error on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace condforge
