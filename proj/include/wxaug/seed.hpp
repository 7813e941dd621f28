#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace wxaug {

/// Stable across platforms and runs: BLAKE2b over the seed and length-prefixed parts.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::string_view> parts);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Throws std::runtime_error on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace wxaug
