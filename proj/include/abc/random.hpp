#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace abc {

using Engine = std::mt19937_64;

/// Named purposes for derived random streams. Every stream is a pure function
/// of (master seed, tag, indices), so results never depend on evaluation
/// order or thread count.
enum class StreamTag : std::uint64_t {
  table_row = 1,
  select_v = 2,
  mc_null = 3,
  resimulate = 4,
  observed = 5,
  adjust = 6,
  ks_null = 7,
  selftest = 8,
  user = 100,
};

/// 64-bit avalanche mix of a key tuple (splitmix64 finalizer chain).
std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0);

inline Engine make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Engine{derive_seed(seed, tag, a, b)};
}

/// Uniform draw on the open interval (0,1) with 53 bits of resolution.
inline double uniform_open(Engine& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform draw on [lo, hi] that never leaves the interval.
double uniform_between(Engine& rng, double lo, double hi);

/// Uniform integer in [0, n).
std::size_t uniform_index(Engine& rng, std::size_t n);

}  // namespace abc
