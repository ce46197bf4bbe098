// Seed derivation helpers. Every randomized routine takes an explicit seed and
// derives sub-stream seeds with splitmix64 so results are schedule-independent.
#pragma once

#include <cmath>
#include <cstdint>

namespace drefc::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Deterministic seed for sub-stream `index` of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

// Maps a 64-bit word to (0, 1); never returns exactly 0 or 1.
inline double to_unit(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform_from_seed(std::uint64_t seed, std::uint64_t index) {
  return to_unit(splitmix64(seed ^ splitmix64(index + 0x51ED2701A9B4C1D3ULL)));
}

// Counter-based standard normal draw (Box-Muller); one value per index.
inline double gaussian_from_seed(std::uint64_t seed, std::uint64_t index) {
  const double u1 = uniform_from_seed(seed, 2 * index);
  const double u2 = uniform_from_seed(seed, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace drefc::detail
