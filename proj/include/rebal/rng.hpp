#pragma once

#include <cstdint>

namespace rebal {

/// SplitMix64 generator (Steele, Lea & Flood's mix finalizer over a Weyl
/// sequence). Chosen over std::mt19937_64 because its output is defined by
/// ~10 lines of integer arithmetic and is therefore reproducible across
/// platforms and implementations, and because streams can be split by
/// deriving a child seed from (seed, index) without correlation.
///
/// Stream splitting: derive(seed, k) mixes the pair into a fresh seed, so
/// per-trial generators are independent of how many trials run before them.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double next_double(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  /// Uniform integer in [0, bound). Bound must be positive.
  std::uint64_t next_below(std::uint64_t bound) {
    // Modulo bias is negligible for the small bounds used here.
    return next() % bound;
  }

  /// Deterministic child seed for stream `index` of `seed`.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 g(seed ^ (0xA5A5A5A55A5A5A5AULL + index * 0x9E3779B97F4A7C15ULL));
    g.next();
    return g.next();
  }

 private:
  std::uint64_t state_;
};

}  // namespace rebal
