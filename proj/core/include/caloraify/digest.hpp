#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace caloraify {

/// Lowercase hex SHA-256 of raw bytes.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view bytes);

}  // namespace caloraify

namespace caloraify {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Accepts standard padded base64, ignoring ASCII whitespace. Throws InputError on bad input.
std::vector<std::uint8_t> base64_decode(std::string_view encoded);

}  // namespace caloraify
