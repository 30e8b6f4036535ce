#pragma once

#include <cstdint>
#include <random>

namespace pb::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Decorrelated per-stream seed so adding a consumer never shifts the draws
// of another.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

// Uniform in [-1, 1) from the top 53 bits; avoids the implementation-defined
// draw order of std::uniform_real_distribution.
inline double unit_symmetric(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

}  // namespace pb::rng
