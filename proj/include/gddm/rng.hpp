#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include "gddm/field.hpp"

namespace gddm {

/// Seeded pseudo-random source.
///
/// The bit generator is xoshiro256++ with its 256-bit state expanded from the
/// 64-bit seed by SplitMix64. Normal variates use Boost's ziggurat
/// `normal_distribution`, which is stateless, so a stream is fully determined
/// by the seed and the number of draws made so far. Instances are
/// single-owner: use `derive` to hand independent streams to other chains.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform integer on [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) noexcept;
  double normal();
  void fill_normal(std::span<double> out, double sigma = 1.0);

  /// Independent stream keyed by (seed, key); does not advance this stream.
  Rng derive(std::uint64_t key) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
};

/// i.i.d. N(0, sigma^2) field; throws ParameterError unless sigma > 0.
Field sample_gaussian(const Shape& shape, double sigma, Rng& rng);

}  // namespace gddm
