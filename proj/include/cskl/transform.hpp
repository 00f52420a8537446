#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

namespace cskl {

enum class OperatorKind : std::uint8_t { dense = 0, structured = 1 };

// Unnormalized in-place fast Walsh-Hadamard transform. v.size() must be a
// power of two; computes H*v with H entries +-1, so fwht(fwht(v)) == n*v.
void fwht(Eigen::Ref<Eigen::VectorXd> v);

inline std::size_t next_pow2(std::size_t d) {
  std::size_t p = 1;
  while (p < d) p <<= 1;
  return p;
}

// The m x d random linear stage W of a feature map. Either an explicit
// iid Gaussian matrix or a stack of Hadamard-diagonal blocks
// B = D0 * (d_pad^{-3/2} H D1 H D2 H D3) applied to the zero-padded input.
// Coefficients are always regenerated from (kind, m, d, sigma_w, seed);
// they are never serialized. Immutable after construction; apply() is
// safe to call concurrently.
class FrequencyOperator {
 public:
  static FrequencyOperator build_dense(std::size_t m, std::size_t d,
                                       double sigma_w, std::uint64_t seed);
  static FrequencyOperator build_structured(std::size_t m, std::size_t d,
                                            double sigma_w,
                                            std::uint64_t seed);

  // Wraps an explicit coefficient matrix. Not regenerable from a seed, so
  // not serializable; intended for small hand-built operators.
  static FrequencyOperator from_matrix(Eigen::MatrixXd coefficients,
                                       double sigma_w = 1.0);

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // Explicit m x d matrix equal to this operator (columns recovered by
  // applying to basis vectors in the structured case).
  Eigen::MatrixXd materialize() const;

  OperatorKind kind() const { return kind_; }
  std::size_t rows() const { return m_; }
  std::size_t dim() const { return d_; }
  std::size_t padded_dim() const { return d_pad_; }
  double sigma_w() const { return sigma_w_; }
  std::uint64_t seed() const { return seed_; }

  // Dense coefficient matrix; valid only for kind() == dense.
  const Eigen::MatrixXd& coefficients() const { return dense_; }

  // Explicit matrix view for either kind; structured operators memoize the
  // materialization on first use (atom evaluations need per-row access).
  const Eigen::MatrixXd& matrix() const;

  // Row j of W as a dense vector (materializes one row for structured).
  Eigen::VectorXd row(std::size_t j) const;

 private:
  struct Block {
    Eigen::VectorXd chi;  // D0 diagonal, chi(d_pad)-distributed, > 0
    Eigen::VectorXd r1, r2, r3;  // Rademacher diagonals, entries +-1
  };

  FrequencyOperator() = default;

  OperatorKind kind_ = OperatorKind::dense;
  std::size_t m_ = 0, d_ = 0, d_pad_ = 0;
  double sigma_w_ = 0.0;
  std::uint64_t seed_ = 0;
  struct MatrixCache {
    std::once_flag once;
    Eigen::MatrixXd matrix;
  };

  Eigen::MatrixXd dense_;      // dense only
  std::vector<Block> blocks_;  // structured only
  std::unique_ptr<MatrixCache> cache_;  // structured, filled on demand
};

}  // namespace cskl
