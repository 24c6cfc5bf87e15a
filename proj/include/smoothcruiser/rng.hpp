#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include "smoothcruiser/errors.hpp"

namespace smoothcruiser {

// SplitMix64 finalizer. Passes standard avalanche tests; used here as the
// mixing function of a counter-based generator.
inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Splittable counter-based random stream. The i-th output is a pure function
// of (key, i), so streams can be split with child() and advanced
// independently: parallel and serial execution of disjoint substreams produce
// identical draws.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(mix64(seed)) {}

  // Derives an independent substream. child(a) and child(b) collide only if
  // mix64(key ^ mix64(a)) == mix64(key ^ mix64(b)).
  RngStream child(std::uint64_t k) const {
    return RngStream(key_ ^ mix64(k ^ 0x517cc1b727220a95ULL), 0);
  }

  std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * next_double(); }

  // Draws an index proportional to nonnegative weights, by inverse CDF over
  // cumulative sums taken in index order.
  std::size_t categorical(std::span<const double> weights, double total) {
    if (weights.empty() || !(total > 0.0)) {
      throw Error(errc::internal_logic,
                  "categorical draw requires positive total weight");
    }
    const double u = next_double() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

 private:
  RngStream(std::uint64_t raw_key, int) : key_(raw_key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace smoothcruiser
