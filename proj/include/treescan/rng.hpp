#pragma once

#include <cstdint>

namespace treescan {

/// splitmix64; used to derive independent per-task seeds so parallel work
/// (RANSAC iterations, rays, scans) is reproducible regardless of scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(mix_seed(a, b) ^ splitmix64(c));
}

}  // namespace treescan
