#pragma once

#include <cstdint>

namespace cavlab {

// Deterministic, platform-independent PRNG (splitmix64). std::mt19937 with
// std::uniform_real_distribution is not bit-stable across standard library
// implementations, and field generation must be reproducible byte-for-byte.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit mantissa
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }
};

// Stateless per-index hash, used so tile values do not depend on traversal order.
inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 g(seed ^ (0x9e3779b97f4a7c15ull + index * 0xff51afd7ed558ccdull));
  return g.next();
}

} // namespace cavlab
