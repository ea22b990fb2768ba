#include "abc/random.hpp"

#include <algorithm>

namespace abc {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ static_cast<std::uint64_t>(tag));
  h = splitmix(h ^ a);
  h = splitmix(h ^ b);
  return h;
}

double uniform_between(Engine& rng, double lo, double hi) {
  return std::clamp(lo + (hi - lo) * uniform_open(rng), lo, hi);
}

std::size_t uniform_index(Engine& rng, std::size_t n) {
  // Lemire's multiply-shift with rejection; unbiased for any n.
  const std::uint64_t range = n;
  unsigned __int128 m = static_cast<unsigned __int128>(rng()) * range;
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = -range % range;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(rng()) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

}  // namespace abc
