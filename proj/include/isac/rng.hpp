#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "isac/common.hpp"

namespace isac {

/// Seeded random stream. All distributions are generated explicitly from the
/// raw engine output so that draws are identical across standard library
/// implementations (std::normal_distribution et al. are not pinned by the
/// standard). Value-copyable; a copy continues the stream independently.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform angle in (-pi, pi].
  double angle() { return kPi - kTwoPi * uniform(); }

  /// Standard normal via Box-Muller; one spare draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = kTwoPi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Exponential with unit mean; used for |h|^2 of CN(0,1) fading.
  double exponential() { return -std::log(1.0 - uniform()); }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace isac
