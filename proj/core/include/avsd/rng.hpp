#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace avsd {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child stream for (seed, index), so work item i draws the same numbers
/// regardless of how items are scheduled.
inline Rng split_rng(std::uint64_t seed, std::uint64_t index) {
  return Rng(mix_seed(mix_seed(seed) ^ mix_seed(index + 0x632be59bd9b4e019ULL)));
}

/// Uniform double in [0, 1) from the top 53 bits; unlike
/// std::uniform_real_distribution this is identical across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Standard normal via Box-Muller on uniform01 (portable across libraries).
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

}  // namespace avsd
