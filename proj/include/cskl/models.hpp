#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace cskl {

// k centroids with nonnegative weights summing to one. Components are
// canonicalized by descending weight, ties by lexicographic centroid order.
struct CentroidModel {
  Eigen::MatrixXd centroids;  // k x d
  Eigen::VectorXd weights;    // k, nonnegative, sums to 1

  std::size_t k() const { return static_cast<std::size_t>(centroids.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(centroids.cols()); }
};

// Diagonal-covariance Gaussian mixture.
struct GmmModel {
  Eigen::VectorXd weights;    // k
  Eigen::MatrixXd means;      // k x d
  Eigen::MatrixXd variances;  // k x d, strictly positive

  std::size_t k() const { return static_cast<std::size_t>(means.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(means.cols()); }
};

// R = U U^T, symmetric PSD with rank <= k by construction.
struct LowRankPsd {
  Eigen::MatrixXd factor;  // d x k

  Eigen::MatrixXd matrix() const { return factor * factor.transpose(); }
  // Orthonormal column basis of the factor (the recovered subspace).
  Eigen::MatrixXd basis() const;
};

}  // namespace cskl
