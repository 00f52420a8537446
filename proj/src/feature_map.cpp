#include "cskl/feature_map.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "cskl/rng.hpp"

namespace cskl {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
std::uint64_t fnv1a_value(std::uint64_t h, T v) {
  return fnv1a(h, &v, sizeof(v));
}

void check_input(const FeatureMapSpec& spec,
                 const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (static_cast<std::size_t>(x.size()) != spec.input_dim())
    throw std::invalid_argument("feature map: input dimension mismatch");
}

}  // namespace

void FeatureMapSpec::compute_fingerprint() {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV offset basis
  h = fnv1a_value(h, static_cast<std::uint8_t>(kind_));
  h = fnv1a_value(h, static_cast<std::uint64_t>(m_));
  h = fnv1a_value(h, static_cast<std::uint64_t>(d_));
  if (op_) {
    h = fnv1a_value(h, static_cast<std::uint8_t>(op_->kind()));
    h = fnv1a_value(h, static_cast<std::uint64_t>(op_->padded_dim()));
    h = fnv1a_value(h, op_->sigma_w());
    h = fnv1a_value(h, op_->seed());
  }
  h = fnv1a_value(h, dither_seed_);
  fingerprint_ = h;
}

FeatureMapSpec FeatureMapSpec::rff_complex(
    std::shared_ptr<const FrequencyOperator> op) {
  if (!op) throw std::invalid_argument("rff_complex: operator required");
  FeatureMapSpec s;
  s.kind_ = MapKind::rff_complex;
  s.m_ = op->rows();
  s.d_ = op->dim();
  s.op_ = std::move(op);
  s.compute_fingerprint();
  return s;
}

FeatureMapSpec FeatureMapSpec::rff_quantized(
    std::shared_ptr<const FrequencyOperator> op, std::uint64_t dither_seed) {
  if (!op) throw std::invalid_argument("rff_quantized: operator required");
  FeatureMapSpec s;
  s.kind_ = MapKind::rff_quantized;
  s.m_ = op->rows();
  s.d_ = op->dim();
  s.op_ = std::move(op);
  s.dither_seed_ = dither_seed;
  Rng rng(dither_seed);
  s.dither_.resize(static_cast<Eigen::Index>(s.m_));
  for (Eigen::Index j = 0; j < s.dither_.size(); ++j)
    s.dither_[j] = rng.uniform();
  s.compute_fingerprint();
  return s;
}

FeatureMapSpec FeatureMapSpec::quadratic(
    std::shared_ptr<const FrequencyOperator> op) {
  if (!op) throw std::invalid_argument("quadratic: operator required");
  FeatureMapSpec s;
  s.kind_ = MapKind::quadratic;
  s.m_ = op->rows();
  s.d_ = op->dim();
  s.op_ = std::move(op);
  s.compute_fingerprint();
  return s;
}

FeatureMapSpec FeatureMapSpec::outer_product(std::size_t d) {
  if (d == 0) throw std::invalid_argument("outer_product: d must be >= 1");
  FeatureMapSpec s;
  s.kind_ = MapKind::outer_product;
  s.m_ = d * d;
  s.d_ = d;
  s.compute_fingerprint();
  return s;
}

Eigen::VectorXcd FeatureMapSpec::evaluate(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  switch (kind_) {
    case MapKind::rff_complex:
      return rff(*this, x);
    case MapKind::rff_quantized:
      return cskl::rff_quantized(*this, x).cast<std::complex<double>>();
    case MapKind::quadratic:
      return cskl::quadratic(*this, x).cast<std::complex<double>>();
    case MapKind::outer_product:
      return cskl::outer_product(x).cast<std::complex<double>>();
  }
  throw std::logic_error("unreachable");
}

Eigen::VectorXcd rff(const FeatureMapSpec& spec,
                     const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (spec.kind() != MapKind::rff_complex)
    throw std::invalid_argument("rff: spec kind is not rff_complex");
  check_input(spec, x);
  const Eigen::VectorXd u = spec.op().apply(x);
  Eigen::VectorXcd out(u.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double a = kTwoPi * u[j];
    out[j] = std::complex<double>(std::cos(a), -std::sin(a));
  }
  return out;
}

Eigen::VectorXd rff_quantized(const FeatureMapSpec& spec,
                              const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (spec.kind() != MapKind::rff_quantized)
    throw std::invalid_argument("rff_quantized: spec kind mismatch");
  check_input(spec, x);
  const Eigen::VectorXd u = spec.op().apply(x) + spec.dither();
  Eigen::VectorXd out(u.size());
  for (Eigen::Index j = 0; j < u.size(); ++j)
    out[j] = std::cos(kTwoPi * u[j]) >= 0.0 ? 1.0 : -1.0;
  return out;
}

Eigen::VectorXd quadratic(const FeatureMapSpec& spec,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (spec.kind() != MapKind::quadratic)
    throw std::invalid_argument("quadratic: spec kind mismatch");
  check_input(spec, x);
  return spec.op().apply(x).array().square();
}

Eigen::VectorXd outer_product(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index d = x.size();
  Eigen::MatrixXd xxT = x * x.transpose();
  return Eigen::Map<Eigen::VectorXd>(xxT.data(), d * d);
}

Eigen::VectorXcd dirac_atom(const FeatureMapSpec& spec,
                            const Eigen::Ref<const Eigen::VectorXd>& c) {
  switch (spec.kind()) {
    case MapKind::rff_complex:
      return rff(spec, c);
    case MapKind::quadratic:
      return quadratic(spec, c).cast<std::complex<double>>();
    default:
      throw std::invalid_argument("dirac_atom: unsupported map kind");
  }
}

Eigen::VectorXcd gaussian_atom(
    const FeatureMapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& mu,
    const Eigen::Ref<const Eigen::VectorXd>& sigma2) {
  if (spec.kind() != MapKind::rff_complex)
    throw std::invalid_argument("gaussian_atom: requires rff_complex map");
  check_input(spec, mu);
  if (sigma2.size() != mu.size())
    throw std::invalid_argument("gaussian_atom: sigma2 dimension mismatch");
  if ((sigma2.array() < 0.0).any())
    throw std::invalid_argument("gaussian_atom: negative variance");
  const Eigen::MatrixXd& W = spec.op().matrix();
  Eigen::VectorXcd out(W.rows());
  const double two_pi_sq = 2.0 * M_PI * M_PI;
  for (Eigen::Index j = 0; j < W.rows(); ++j) {
    const double phase = kTwoPi * W.row(j).dot(mu);
    const double damp =
        two_pi_sq * (W.row(j).transpose().array().square() * sigma2.array())
                        .sum();
    const double r = std::exp(-damp);
    out[j] = std::complex<double>(r * std::cos(phase), -r * std::sin(phase));
  }
  return out;
}

Eigen::MatrixXcd dirac_atom_gradient(
    const FeatureMapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& c) {
  if (spec.kind() != MapKind::rff_complex)
    throw std::invalid_argument("dirac_atom_gradient: requires rff_complex");
  const Eigen::VectorXcd phi = rff(spec, c);
  const Eigen::MatrixXd& W = spec.op().matrix();
  const std::complex<double> minus_j_two_pi(0.0, -kTwoPi);
  Eigen::MatrixXcd J(W.rows(), W.cols());
  for (Eigen::Index j = 0; j < W.rows(); ++j)
    J.row(j) = (minus_j_two_pi * phi[j]) * W.row(j).cast<std::complex<double>>();
  return J;
}

GaussianAtomGradient gaussian_atom_gradient(
    const FeatureMapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& mu,
    const Eigen::Ref<const Eigen::VectorXd>& sigma2) {
  const Eigen::VectorXcd a = gaussian_atom(spec, mu, sigma2);
  const Eigen::MatrixXd& W = spec.op().matrix();
  const std::complex<double> minus_j_two_pi(0.0, -kTwoPi);
  const double two_pi_sq = 2.0 * M_PI * M_PI;
  GaussianAtomGradient g;
  g.d_mu.resize(W.rows(), W.cols());
  g.d_sigma2.resize(W.rows(), W.cols());
  for (Eigen::Index j = 0; j < W.rows(); ++j) {
    g.d_mu.row(j) =
        (minus_j_two_pi * a[j]) * W.row(j).cast<std::complex<double>>();
    g.d_sigma2.row(j) =
        (-two_pi_sq * a[j]) *
        W.row(j).array().square().matrix().cast<std::complex<double>>();
  }
  return g;
}

double expected_kernel(double sigma_w,
                       const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& x_prime) {
  const double dist2 = (x - x_prime).squaredNorm();
  return std::exp(-2.0 * M_PI * M_PI * sigma_w * sigma_w * dist2);
}

}  // namespace cskl
