#pragma once

#include <cstdint>
#include <random>

namespace censelect {

/// splitmix64 finalizer; the standard 64-bit mixing function.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for (cell, replicate) within an experiment: three chained splitmix64
/// rounds so that nearby indices give unrelated streams. Workers may derive
/// seeds in any order; the result depends only on the arguments.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t cell,
                                 std::uint64_t replicate) {
  return splitmix64(splitmix64(splitmix64(base) ^ cell) ^ replicate);
}

/// Independent substream of an existing seed (fold shuffles, truth draws, ...).
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace censelect
