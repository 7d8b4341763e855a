#pragma once
// Deterministic randomness helpers. All sampling is built from raw
// mt19937_64 outputs because std::uniform_*_distribution algorithms are
// implementation-defined and would break cross-platform reproducibility.
#include <cstdint>
#include <random>
#include <vector>

namespace bofspot {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline uint64_t rng_below(std::mt19937_64& rng, uint64_t n) { return rng() % n; }

// inclusive range
inline int64_t rng_range(std::mt19937_64& rng, int64_t lo, int64_t hi) {
  return lo + static_cast<int64_t>(rng_below(rng, static_cast<uint64_t>(hi - lo + 1)));
}

// uniform in [0, 1)
inline double rng_unit(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

inline bool rng_coin(std::mt19937_64& rng, double p) { return rng_unit(rng) < p; }

template <typename T>
void rng_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; i--) std::swap(v[i - 1], v[rng_below(rng, i)]);
}

}  // namespace bofspot
