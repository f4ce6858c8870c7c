#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace anchorpt {

using Rng = std::mt19937_64;

/// Stable 64-bit seed for a child stream keyed by a textual path, so that
/// results do not depend on the order in which work items are processed.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view path) {
  std::uint64_t h = 1469598103934665603ULL ^ base;  // FNV-1a
  for (unsigned char c : path) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // splitmix64 finalizer
  h += 0x9E3779B97F4A7C15ULL;
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
  return h ^ (h >> 31);
}

inline Rng child_rng(std::uint64_t base, std::string_view path) {
  return Rng(derive_seed(base, path));
}

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace anchorpt
