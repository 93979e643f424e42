#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace faultbin {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for one member of a seeded family, e.g. (base seed, trial index).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(base ^ mix64(a ^ mix64(b + 0x51ed27ULL)));
}

// The standard distributions are implementation-defined; these are not, so
// seeded draws match across toolchains.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;
  for (;;) {
    const std::uint64_t v = rng();
    if (v < limit) return v % n;
  }
}

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Moves `take` uniformly chosen elements to the front (all of them by default).
template <class T>
void partial_shuffle(std::vector<T>& v, std::mt19937_64& rng, std::size_t take = static_cast<std::size_t>(-1)) {
  for (std::size_t i = 0; i < take && i + 1 < v.size(); ++i) {
    const std::size_t j = i + bounded(rng, v.size() - i);
    std::swap(v[i], v[j]);
  }
}

}  // namespace faultbin
