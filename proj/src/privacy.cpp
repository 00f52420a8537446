#include "cskl/privacy.hpp"

#include <cmath>
#include <stdexcept>

#include "cskl/errors.hpp"
#include "cskl/rng.hpp"

namespace cskl {

SensitivityBounds sensitivity(const FeatureMapSpec& spec, std::uint64_t n,
                              double data_radius) {
  if (n < 1) throw std::invalid_argument("sensitivity: n must be >= 1");
  const double m = static_cast<double>(spec.feature_dim());
  const double nn = static_cast<double>(n);
  SensitivityBounds b;
  switch (spec.kind()) {
    case MapKind::rff_complex:
      // per frequency the complex value moves by at most 2 in modulus;
      // |Re| + |Im| of a complex number is at most sqrt(2) its modulus
      b.l2 = 2.0 * std::sqrt(m) / nn;
      b.l1 = 2.0 * std::sqrt(2.0) * m / nn;
      return b;
    case MapKind::rff_quantized:
      b.l2 = 2.0 * std::sqrt(m) / nn;
      b.l1 = 2.0 * m / nn;
      return b;
    case MapKind::quadratic: {
      if (!(data_radius > 0.0))
        throw std::invalid_argument(
            "sensitivity: quadratic map is unbounded; supply a data-radius "
            "bound");
      // per coordinate (w_j^T x)^2 <= ||w_j||^2 r^2
      const Eigen::VectorXd row2 = spec.op().matrix().rowwise().squaredNorm();
      const double r2 = data_radius * data_radius;
      b.l1 = row2.sum() * r2 / nn;
      b.l2 = row2.norm() * r2 / nn;
      return b;
    }
    default:
      throw std::invalid_argument(
          "sensitivity: unsupported map kind; supply a data-radius bound");
  }
}

namespace {

void check_privatizable(const Sketch& s, const FeatureMapSpec& spec) {
  if (s.sealed())
    throw SealedSketchError("privatize: sketch is already privatized");
  if (s.fingerprint != spec.fingerprint())
    throw IncompatibleSketchError("privatize: sketch/spec mismatch");
}

}  // namespace

Sketch privatize_laplace(const Sketch& s, const FeatureMapSpec& spec,
                         double epsilon, std::uint64_t seed) {
  check_privatizable(s, spec);
  if (!(epsilon > 0.0))
    throw std::invalid_argument("privatize_laplace: epsilon must be > 0");
  const double scale = sensitivity(spec, s.n).l1 / epsilon;
  Rng rng(seed);
  Sketch out = s;
  for (Eigen::Index j = 0; j < out.values.size(); ++j) {
    const double re = rng.laplace(scale);
    const double im = rng.laplace(scale);
    out.values[j] += std::complex<double>(re, im);
  }
  out.privacy = PrivacyRecord{DpMechanism::laplace, epsilon, 0.0};
  return out;
}

Sketch privatize_gaussian(const Sketch& s, const FeatureMapSpec& spec,
                          double epsilon, double delta, std::uint64_t seed) {
  check_privatizable(s, spec);
  if (!(epsilon > 0.0) || epsilon > 1.0)
    throw std::invalid_argument(
        "privatize_gaussian: epsilon must lie in (0, 1]");
  if (!(delta > 0.0) || delta >= 1.0)
    throw std::invalid_argument("privatize_gaussian: delta must lie in (0,1)");
  const double sigma =
      sensitivity(spec, s.n).l2 * std::sqrt(2.0 * std::log(1.25 / delta)) /
      epsilon;
  Rng rng(seed);
  Sketch out = s;
  for (Eigen::Index j = 0; j < out.values.size(); ++j) {
    const double re = sigma * rng.gaussian();
    const double im = sigma * rng.gaussian();
    out.values[j] += std::complex<double>(re, im);
  }
  out.privacy = PrivacyRecord{DpMechanism::gaussian, epsilon, delta};
  return out;
}

}  // namespace cskl
