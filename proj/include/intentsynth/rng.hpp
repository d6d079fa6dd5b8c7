#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>

namespace intentsynth {

// SplitMix64. Used everywhere a reproducible stream is needed; unlike the
// <random> distributions its output is identical on every standard library.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t state = 0) : state_(state) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % bound;
  }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0)
      u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t state() const { return state_; }

private:
  std::uint64_t state_;
};

// Derive an independent stream for a (seed, tag) pair.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  SplitMix64 rng(seed ^ (tag * 0xd1b54a32d192ed03ULL));
  return rng.next();
}

template <typename T> void shuffle_in_place(std::span<T> items, SplitMix64 &rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

} // namespace intentsynth
