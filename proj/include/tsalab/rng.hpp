#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace tsalab {

/// SplitMix64 finalizer; used to derive seeds, never as a stream itself.
std::uint64_t splitmix64(std::uint64_t& state);

/// Combines a campaign seed and an index into a decorrelated 64-bit seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// xoshiro256** (Blackman & Vigna) seeded through SplitMix64. The algorithm
/// is fully specified here so streams are identical on every platform; the
/// standard library's distributions are avoided for the same reason.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream for (seed, index), e.g. one per Monte-Carlo trial.
  static Rng stream(std::uint64_t seed, std::uint64_t index) { return Rng(derive_seed(seed, index)); }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard normal via the Marsaglia polar method (spare value cached).
  double normal() noexcept;

  void fill_normal(std::span<double> out) noexcept {
    for (double& v : out) v = normal();
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tsalab
