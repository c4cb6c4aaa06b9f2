#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace locklab {

using Rng = std::mt19937_64;

// splitmix64; used to derive independent child seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform draw from [0, n) that does not depend on the standard library's
// distribution implementation, so seeded runs replay everywhere.
inline std::uint64_t rand_below(Rng& rng, std::uint64_t n) {
  return std::uint64_t((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

inline bool rand_bit(Rng& rng) { return (rng() >> 63) != 0; }

inline double rand_unit(Rng& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

// Counter-based uniform in [0,1): hash the counter, no generator state.
// Lets parallel loops draw per-element randomness independent of the
// iteration order and thread count.
inline double unit_at(std::uint64_t seed, std::uint64_t counter) {
  return double(mix_seed(seed, counter) >> 11) * 0x1.0p-53;
}

// Uniform double in [-a, a].
inline double rand_symmetric(Rng& rng, double a) {
  return (2.0 * rand_unit(rng) - 1.0) * a;
}

inline std::vector<bool> rand_bits(Rng& rng, int n) {
  std::vector<bool> bits(n);
  for (int i = 0; i < n; ++i) bits[i] = rand_bit(rng);
  return bits;
}

}  // namespace locklab
