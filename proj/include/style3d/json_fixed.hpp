#pragma once

// JSON text with every floating-point number printed at a fixed number of
// decimals, so reports are byte-stable and diff-friendly. Key order is the
// insertion order of ordered_json.

#include <json.hpp>

#include <cstdint>
#include <string>

namespace style3d {

std::string dump_fixed(const nlohmann::ordered_json& j, int decimals = 6, int indent = 2);

// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v);

}  // namespace style3d
