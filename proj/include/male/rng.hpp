#pragma once

#include <cstdint>
#include <limits>

#include "male/normal.hpp"

namespace male {

namespace detail {

// SplitMix64 finalizer: a bijective avalanche mix on 64 bits.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ULL;

}  // namespace detail

/// Counter-based 64-bit generator.
///
/// Output i of stream s under seed k is a pure function of (k, s, i), so
/// draws can be regenerated out of order and independent streams are
/// obtained by `split` without sharing state. Satisfies
/// UniformRandomBitGenerator.
class counter_rng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr counter_rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key0_(detail::mix64(seed ^ detail::mix64(stream + detail::golden_gamma))),
        key1_(detail::mix64(key0_ + detail::golden_gamma * (stream + 1))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  /// Value at an absolute counter position, independent of the cursor.
  constexpr result_type at(std::uint64_t counter) const noexcept {
    return detail::mix64(detail::mix64(counter ^ key0_) + key1_);
  }

  constexpr result_type operator()() noexcept { return at(counter_++); }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal draw by inversion.
  double normal() { return inverse_normal_cdf(uniform()); }

  /// Uniform integer in [0, bound) by rejection (bound > 0).
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x = (*this)();
    while (x >= limit) x = (*this)();
    return x % bound;
  }

  /// Derived independent stream; does not advance this generator.
  constexpr counter_rng split(std::uint64_t stream) const noexcept {
    return counter_rng(key1_ ^ detail::mix64(key0_), stream);
  }

  constexpr std::uint64_t position() const noexcept { return counter_; }

 private:
  std::uint64_t key0_;
  std::uint64_t key1_;
  std::uint64_t counter_ = 0;
};

}  // namespace male
