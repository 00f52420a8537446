#include "cskl/transform.hpp"

#include <cmath>
#include <stdexcept>

#include "cskl/rng.hpp"

namespace cskl {

void fwht(Eigen::Ref<Eigen::VectorXd> v) {
  const std::size_t n = static_cast<std::size_t>(v.size());
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fwht: length must be a power of two");
  for (std::size_t h = 1; h < n; h <<= 1) {
    for (std::size_t i = 0; i < n; i += h << 1) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = v[static_cast<Eigen::Index>(j)];
        const double b = v[static_cast<Eigen::Index>(j + h)];
        v[static_cast<Eigen::Index>(j)] = a + b;
        v[static_cast<Eigen::Index>(j + h)] = a - b;
      }
    }
  }
}

namespace {

void check_params(std::size_t m, std::size_t d, double sigma_w) {
  if (m == 0 || d == 0)
    throw std::invalid_argument("frequency operator: m and d must be >= 1");
  if (!(sigma_w > 0.0))
    throw std::invalid_argument("frequency operator: sigma_w must be > 0");
}

}  // namespace

FrequencyOperator FrequencyOperator::build_dense(std::size_t m, std::size_t d,
                                                 double sigma_w,
                                                 std::uint64_t seed) {
  check_params(m, d, sigma_w);
  FrequencyOperator op;
  op.kind_ = OperatorKind::dense;
  op.m_ = m;
  op.d_ = d;
  op.d_pad_ = d;
  op.sigma_w_ = sigma_w;
  op.seed_ = seed;
  op.dense_.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  // Draw order contract: row-major, one N(0, sigma_w^2) value per entry.
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j)
      op.dense_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          sigma_w * rng.gaussian();
  return op;
}

FrequencyOperator FrequencyOperator::build_structured(std::size_t m,
                                                      std::size_t d,
                                                      double sigma_w,
                                                      std::uint64_t seed) {
  check_params(m, d, sigma_w);
  FrequencyOperator op;
  op.kind_ = OperatorKind::structured;
  op.m_ = m;
  op.d_ = d;
  op.d_pad_ = next_pow2(d);
  op.sigma_w_ = sigma_w;
  op.seed_ = seed;
  const std::size_t d_pad = op.d_pad_;
  const std::size_t b = (m + d_pad - 1) / d_pad;
  op.blocks_.reserve(b);
  for (std::size_t blk = 0; blk < b; ++blk) {
    // One split sub-stream per block; within a block the draw order is
    // D0 (each chi entry as the norm of d_pad standard Gaussians),
    // then D1, D2, D3 Rademacher diagonals.
    Rng rng(Rng::derive(seed, blk));
    Block block;
    block.chi.resize(static_cast<Eigen::Index>(d_pad));
    for (std::size_t i = 0; i < d_pad; ++i) {
      double s = 0.0;
      for (std::size_t t = 0; t < d_pad; ++t) {
        const double g = rng.gaussian();
        s += g * g;
      }
      block.chi[static_cast<Eigen::Index>(i)] = std::sqrt(s);
    }
    for (auto* diag : {&block.r1, &block.r2, &block.r3}) {
      diag->resize(static_cast<Eigen::Index>(d_pad));
      for (std::size_t i = 0; i < d_pad; ++i)
        (*diag)[static_cast<Eigen::Index>(i)] = rng.rademacher();
    }
    op.blocks_.push_back(std::move(block));
  }
  op.cache_ = std::make_unique<MatrixCache>();
  return op;
}

FrequencyOperator FrequencyOperator::from_matrix(Eigen::MatrixXd coefficients,
                                                 double sigma_w) {
  if (coefficients.rows() == 0 || coefficients.cols() == 0)
    throw std::invalid_argument("from_matrix: empty coefficient matrix");
  FrequencyOperator op;
  op.kind_ = OperatorKind::dense;
  op.m_ = static_cast<std::size_t>(coefficients.rows());
  op.d_ = static_cast<std::size_t>(coefficients.cols());
  op.d_pad_ = op.d_;
  op.sigma_w_ = sigma_w;
  op.seed_ = 0;
  op.dense_ = std::move(coefficients);
  return op;
}

Eigen::VectorXd FrequencyOperator::apply(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (static_cast<std::size_t>(x.size()) != d_)
    throw std::invalid_argument("apply: input dimension mismatch");
  if (kind_ == OperatorKind::dense) return dense_ * x;

  Eigen::VectorXd out(static_cast<Eigen::Index>(m_));
  const auto d_pad = static_cast<Eigen::Index>(d_pad_);
  // Global scale so the three-Hadamard Rademacher composition is
  // orthogonal; the chi diagonal then reproduces Gaussian row norms.
  const double scale =
      sigma_w_ / (std::sqrt(static_cast<double>(d_pad_)) *
                  static_cast<double>(d_pad_));
  Eigen::VectorXd y(d_pad);
  std::size_t written = 0;
  for (const Block& blk : blocks_) {
    y.setZero();
    y.head(static_cast<Eigen::Index>(d_)) = x;
    y.array() *= blk.r3.array();
    fwht(y);
    y.array() *= blk.r2.array();
    fwht(y);
    y.array() *= blk.r1.array();
    fwht(y);
    y.array() *= blk.chi.array() * scale;
    const std::size_t take = std::min(d_pad_, m_ - written);
    out.segment(static_cast<Eigen::Index>(written),
                static_cast<Eigen::Index>(take)) =
        y.head(static_cast<Eigen::Index>(take));
    written += take;
    if (written == m_) break;
  }
  return out;
}

Eigen::MatrixXd FrequencyOperator::materialize() const {
  if (kind_ == OperatorKind::dense) return dense_;
  Eigen::MatrixXd W(static_cast<Eigen::Index>(m_),
                    static_cast<Eigen::Index>(d_));
  Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d_));
  for (std::size_t j = 0; j < d_; ++j) {
    e[static_cast<Eigen::Index>(j)] = 1.0;
    W.col(static_cast<Eigen::Index>(j)) = apply(e);
    e[static_cast<Eigen::Index>(j)] = 0.0;
  }
  return W;
}

const Eigen::MatrixXd& FrequencyOperator::matrix() const {
  if (kind_ == OperatorKind::dense) return dense_;
  std::call_once(cache_->once, [this] { cache_->matrix = materialize(); });
  return cache_->matrix;
}

Eigen::VectorXd FrequencyOperator::row(std::size_t j) const {
  if (j >= m_) throw std::out_of_range("row index out of range");
  return matrix().row(static_cast<Eigen::Index>(j)).transpose();
}

}  // namespace cskl
