#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cskl {

// Counter-stable seeded generator. All randomness in the library flows
// through this class so that draw order is fixed and reproducible across
// processes and platforms. The raw stream is std::mt19937_64 (bit-exact by
// the standard); uniform and Gaussian conversions are implemented here
// rather than with std::*_distribution, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derives an independent sub-stream seed. Used to split one user seed
  // into per-purpose streams (operator coefficients, dither, solver
  // restarts) without draw-order coupling.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream_id) {
    // splitmix64 finalizer over the combined word
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream_id + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; used where log(u) must stay finite.
  double uniform_pos() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; consumes two uniforms per pair,
  // second value cached. Draw order is therefore fixed.
  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // +1 or -1 with equal probability.
  double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

  // Laplace with scale b (mean zero), by inverse CDF.
  double laplace(double b) {
    const double u = uniform() - 0.5;
    const double s = (u < 0.0) ? -1.0 : 1.0;
    return -b * s * std::log1p(-2.0 * std::fabs(u));
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace cskl
