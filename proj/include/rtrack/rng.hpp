#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace rtrack {

/// SplitMix64 stream. Every random quantity in the project comes from one of
/// these, keyed by (seed, domain, id) so streams never depend on call order
/// elsewhere.
class Rng {
 public:
  static constexpr std::uint64_t kIncrement = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t seed) : state_(seed) {}
  static Rng keyed(std::uint64_t seed, std::uint64_t domain, std::uint64_t id) {
    return Rng(mix(seed ^ mix(domain ^ mix(id))));
  }

  /// SplitMix64 finalizer.
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += kIncrement;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() {
    state_ += kIncrement;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next() % n; }
  /// Standard normal via Box-Muller (one draw per call).
  double normal() {
    const double u1 = std::max(uniform(), 0x1.0p-53);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

namespace rng_domain {
inline constexpr std::uint64_t kScene = 1;
inline constexpr std::uint64_t kSequence = 2;
inline constexpr std::uint64_t kParams = 3;
inline constexpr std::uint64_t kTest = 4;
}  // namespace rng_domain

}  // namespace rtrack
