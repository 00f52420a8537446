#pragma once

#include <cstdint>

#include "cskl/sketch.hpp"

namespace cskl {

// Replace-one sensitivity of the mean sketch over its 2m real coordinates.
// Both bounds scale as 1/n.
struct SensitivityBounds {
  double l1 = 0.0;
  double l2 = 0.0;
};

// Closed-form bounds for bounded feature maps:
//   rff_complex:   l2 = 2 sqrt(m) / n,  l1 = 2 sqrt(2) m / n
//   rff_quantized: l2 = 2 sqrt(m) / n,  l1 = 2 m / n
// Quadratic maps need a data-radius bound r (features up to ||w_j||^2 r^2);
// pass data_radius > 0, otherwise the call is an error.
SensitivityBounds sensitivity(const FeatureMapSpec& spec, std::uint64_t n,
                              double data_radius = 0.0);

// epsilon-DP via iid Laplace(scale = l1 / epsilon) noise on each of the
// 2m real coordinates. Output is sealed.
Sketch privatize_laplace(const Sketch& s, const FeatureMapSpec& spec,
                         double epsilon, std::uint64_t seed);

// (epsilon, delta)-DP via iid Gaussian noise with
// sigma = l2 sqrt(2 ln(1.25/delta)) / epsilon; classic mechanism, so
// epsilon must lie in (0, 1]. Output is sealed.
Sketch privatize_gaussian(const Sketch& s, const FeatureMapSpec& spec,
                          double epsilon, double delta, std::uint64_t seed);

}  // namespace cskl
