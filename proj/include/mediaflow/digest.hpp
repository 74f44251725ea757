#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace mediaflow {

// SHA-256 of the bytes, as 64 lowercase hex characters.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

}  // namespace mediaflow
