// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace gdr {

// Counter-based random streams. Every draw is a pure function of
// (seed, counter), so a stream can be evaluated at any index without
// generating its prefix and is identical across runs and thread schedules.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Hash a (seed, a, b) triple into a well-mixed 64-bit word.
inline std::uint64_t hash_mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b + 0x3c6ef372fe94f82bULL));
  return h;
}

/// Uniform double in the open interval (0, 1).
inline double uniform01(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

/// Standard normal draw at stream position (index, component) for a seed.
/// Box-Muller on two independent hashes.
inline double normal_at(std::uint64_t seed, std::uint64_t index, std::uint64_t component) {
  const double u1 = uniform01(hash_mix(seed, index, 2 * component));
  const double u2 = uniform01(hash_mix(seed, index, 2 * component + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace gdr
