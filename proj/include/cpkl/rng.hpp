#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cpkl {

/// Counter-based generator "splitmix64-ctr/1".
///
/// Draw k (k = 0, 1, ...) of a stream with seed s is the SplitMix64 finalizer
/// applied to s + (k + 1) * 0x9E3779B97F4A7C15. The stream is a pure function
/// of (seed, counter), so results are identical on every platform and compiler.
/// Uniform doubles take the top 53 bits; bounded integers use Lemire's
/// multiply-and-reject method. Changing any of this changes generated data and
/// must bump the version suffix.
class CounterRng {
 public:
  static constexpr const char* kName = "splitmix64-ctr/1";

  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1); exact zeros are redrawn.
  double uniform_open() {
    double u = uniform();
    while (u == 0.0) u = uniform();
    return u;
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    __uint128_t m = static_cast<__uint128_t>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = -bound % bound;
      while (low < threshold) {
        m = static_cast<__uint128_t>(next_u64()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Inverse-CDF sampler over nonnegative weights (need not sum to one).
class DiscreteSampler {
 public:
  explicit DiscreteSampler(std::span<const double> weights);
  std::size_t operator()(CounterRng& rng) const;
  std::size_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

}  // namespace cpkl
