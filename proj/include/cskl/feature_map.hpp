#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <memory>

#include "cskl/transform.hpp"

namespace cskl {

enum class MapKind : std::uint8_t {
  rff_complex = 0,
  rff_quantized = 1,
  quadratic = 2,
  outer_product = 3,
};

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Full description of a feature map Phi: linear stage, nonlinearity kind,
// dither, and a fingerprint hashed from every defining parameter. Two
// sketches may be merged only when their fingerprints agree. Immutable;
// all evaluations are reentrant.
class FeatureMapSpec {
 public:
  static FeatureMapSpec rff_complex(
      std::shared_ptr<const FrequencyOperator> op);
  // One dither vector xi per spec, regenerated from dither_seed and shared
  // by all samples sketched under it.
  static FeatureMapSpec rff_quantized(
      std::shared_ptr<const FrequencyOperator> op, std::uint64_t dither_seed);
  static FeatureMapSpec quadratic(std::shared_ptr<const FrequencyOperator> op);
  static FeatureMapSpec outer_product(std::size_t d);

  MapKind kind() const { return kind_; }
  std::size_t feature_dim() const { return m_; }
  std::size_t input_dim() const { return d_; }
  std::uint64_t dither_seed() const { return dither_seed_; }
  const Eigen::VectorXd& dither() const { return dither_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  bool has_operator() const { return static_cast<bool>(op_); }
  const FrequencyOperator& op() const { return *op_; }
  std::shared_ptr<const FrequencyOperator> op_ptr() const { return op_; }

  // Phi(x) in a complex container (imaginary parts zero for real maps).
  Eigen::VectorXcd evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  FeatureMapSpec() = default;
  void compute_fingerprint();

  MapKind kind_ = MapKind::rff_complex;
  std::size_t m_ = 0, d_ = 0;
  std::shared_ptr<const FrequencyOperator> op_;
  std::uint64_t dither_seed_ = 0;
  Eigen::VectorXd dither_;
  std::uint64_t fingerprint_ = 0;
};

// exp(-j 2 pi W x), unit modulus per coordinate.
Eigen::VectorXcd rff(const FeatureMapSpec& spec,
                     const Eigen::Ref<const Eigen::VectorXd>& x);

// sign(cos(2 pi (W x + xi))) in {-1,+1}^m, with sign(0) := +1.
Eigen::VectorXd rff_quantized(const FeatureMapSpec& spec,
                              const Eigen::Ref<const Eigen::VectorXd>& x);

// ((w_1^T x)^2, ..., (w_m^T x)^2).
Eigen::VectorXd quadratic(const FeatureMapSpec& spec,
                          const Eigen::Ref<const Eigen::VectorXd>& x);

// Column-major vec(x x^T), dimension d^2.
Eigen::VectorXd outer_product(const Eigen::Ref<const Eigen::VectorXd>& x);

// Noiseless sketch of a point mass at c: Phi(c).
Eigen::VectorXcd dirac_atom(const FeatureMapSpec& spec,
                            const Eigen::Ref<const Eigen::VectorXd>& c);

// Noiseless sketch of N(mu, diag(sigma2)) under an rff_complex map:
// component j is exp(-j 2 pi w_j^T mu) * exp(-2 pi^2 sum_t w_jt^2 sigma2_t).
Eigen::VectorXcd gaussian_atom(const FeatureMapSpec& spec,
                               const Eigen::Ref<const Eigen::VectorXd>& mu,
                               const Eigen::Ref<const Eigen::VectorXd>& sigma2);

// Jacobian of the Dirac atom w.r.t. c: entry (j,t) = -j 2 pi w_jt Phi_j(c).
Eigen::MatrixXcd dirac_atom_gradient(
    const FeatureMapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& c);

struct GaussianAtomGradient {
  Eigen::MatrixXcd d_mu;      // m x d, entry (j,t) = -j 2 pi w_jt A_j
  Eigen::MatrixXcd d_sigma2;  // m x d, entry (j,t) = -2 pi^2 w_jt^2 A_j
};

GaussianAtomGradient gaussian_atom_gradient(
    const FeatureMapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& mu,
    const Eigen::Ref<const Eigen::VectorXd>& sigma2);

// Infinite-m limit of (1/m)<Phi(x), Phi(x')> for iid N(0, sigma_w^2 I)
// frequencies: exp(-2 pi^2 sigma_w^2 ||x - x'||^2). The corresponding
// Gaussian kernel width is 1/(2 pi sigma_w).
double expected_kernel(double sigma_w,
                       const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& x_prime);

inline double kernel_width_from_sigma_w(double sigma_w) {
  return 1.0 / (kTwoPi * sigma_w);
}
inline double sigma_w_from_kernel_width(double sigma) {
  return 1.0 / (kTwoPi * sigma);
}

}  // namespace cskl
