#pragma once

#include <cmath>
#include <cstdint>

namespace rlsim {

// splitmix64 finalizer
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Counter-based random stream keyed by (seed, stream id).
///
/// Each stream is an independent, reproducible sequence: draw k of stream s
/// is a pure function of (seed, s, k). Creating more streams never perturbs
/// the draws of existing ones, so simulations stay comparable when only the
/// number of processes changes.
class StreamRng {
 public:
  StreamRng() : StreamRng(0, 0) {}
  StreamRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix64(seed + 0x9E3779B97F4A7C15ull * (stream + 1))) {}

  std::uint64_t next_u64() {
    return mix64(key_ + 0x9E3779B97F4A7C15ull * ++counter_);
  }

  /// Uniform double in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Exponential with the given mean (inverse CDF).
  double exponential(double mean) {
    return -mean * std::log1p(-next_unit());
  }

  /// Standard normal via Box-Muller; always consumes exactly two draws.
  double normal01() {
    double u1 = next_unit();
    double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Lognormal parameterized by mean and coefficient of variation.
  double lognormal(double mean, double cv) {
    if (cv <= 0.0) return mean;
    const double sigma2 = std::log1p(cv * cv);
    const double mu = std::log(mean) - 0.5 * sigma2;
    return std::exp(mu + std::sqrt(sigma2) * normal01());
  }

  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace rlsim
