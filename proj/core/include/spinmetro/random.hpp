#pragma once

#include <cstdint>

namespace spinmetro {

// Stateless counter-based stream: every draw is a pure function of
// (seed, key, index), so parallel and serial runs agree.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (mix64(b) + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

// Uniform in the open interval (0, 1).
inline double uniform_open(std::uint64_t seed, std::uint64_t key, std::uint64_t index) {
  const std::uint64_t h = hash_combine(hash_combine(mix64(seed), key), index);
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal by inverse CDF of uniform_open.
double standard_normal(std::uint64_t seed, std::uint64_t key, std::uint64_t index);

}  // namespace spinmetro
