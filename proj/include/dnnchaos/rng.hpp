#pragma once

// Counter-based random stream.
//
// Word k (k = 0, 1, ...) of the stream keyed by `seed` is
//     splitmix64_finalize(seed + (k + 1) * 0x9E3779B97F4A7C15)
// so any word is addressable without replaying the prefix. Uniforms take the
// top 53 bits of one word; Gaussians use the Box-Muller cosine branch on two
// consecutive words (u1 in (0,1], u2 in [0,1)).
//
// Replays are bit-exact within one build; no cross-language promise is made.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace dnnchaos {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64_finalize(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives an independent sub-seed from a base seed and task coordinates.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> coords) noexcept {
  std::uint64_t h = splitmix64_finalize(base ^ 0x6A09E667F3BCC909ULL);
  for (std::uint64_t c : coords) {
    h = splitmix64_finalize(h + kGoldenGamma + splitmix64_finalize(c + 0x3C6EF372FE94F82BULL));
  }
  return h;
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) noexcept
      : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return splitmix64_finalize(seed_ + counter_ * kGoldenGamma);
  }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open_low() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double gaussian() noexcept {
    const double u1 = uniform_open_low();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace dnnchaos
