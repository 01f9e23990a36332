#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace trussvae {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream for task `index` of the stage named `tag`.
inline Rng substream(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : tag) {
    h ^= std::uint8_t(c);
    h *= 1099511628211ULL;
  }
  return Rng(splitmix64(splitmix64(seed ^ h) + splitmix64(index)));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace trussvae
