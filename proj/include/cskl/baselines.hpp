#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cskl/models.hpp"

namespace cskl {

// Synthetic GMM generator standing in for real datasets. Component means
// are placed by seeded rejection sampling with pairwise distance at least
// separation * sigma.
struct SyntheticSpec {
  std::size_t k = 1, d = 1, n = 1;
  double separation = 1.0;  // in units of component sigma
  double sigma = 1.0;
  std::optional<Eigen::VectorXd> weights;  // defaults to uniform
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Eigen::MatrixXd rows;  // n x d
  GmmModel truth;
  std::vector<std::size_t> labels;
};

SyntheticData synth_gmm(const SyntheticSpec& spec);

// Lloyd iterations from k-means++ seeding until the assignment fixpoint
// or 300 iterations; empty clusters reseeded to the farthest point.
CentroidModel lloyd_kmeans(const Eigen::Ref<const Eigen::MatrixXd>& data,
                           std::size_t k, std::uint64_t seed);

// Diagonal-covariance EM; the log-likelihood is asserted non-decreasing
// every iteration.
GmmModel em_gmm(const Eigen::Ref<const Eigen::MatrixXd>& data, std::size_t k,
                std::uint64_t seed);

// Top-k eigenvectors of (1/n) sum x x^T, descending eigenvalues, sign fixed
// so the largest-magnitude entry of each vector is positive.
Eigen::MatrixXd exact_pca(const Eigen::Ref<const Eigen::MatrixXd>& data,
                          std::size_t k);

enum class Task { kmeans, gmm, pca, regress };

// Per-task empirical risk. PCA returns the negative captured energy so
// that all four tasks are minimizations.
double empirical_risk(Task task, const CentroidModel& model,
                      const Eigen::Ref<const Eigen::MatrixXd>& data);
double empirical_risk(Task task, const GmmModel& model,
                      const Eigen::Ref<const Eigen::MatrixXd>& data);
double empirical_risk(Task task, const Eigen::Ref<const Eigen::MatrixXd>& basis_or_theta,
                      const Eigen::Ref<const Eigen::MatrixXd>& data,
                      std::size_t d1 = 0);

// k-means SSE: sum over samples of the squared distance to the nearest
// centroid.
double kmeans_sse(const Eigen::Ref<const Eigen::MatrixXd>& data,
                  const Eigen::Ref<const Eigen::MatrixXd>& centroids);

// (1/n) sum_i exp(-||c - x_i||^2 / (2 sigma^2)).
double parzen_score(const Eigen::Ref<const Eigen::MatrixXd>& data,
                    const Eigen::Ref<const Eigen::VectorXd>& c, double sigma);

// Closed-form MMD between two diagonal GMMs under the Gaussian kernel
// g_sigma(x) = exp(-||x||^2 / (2 sigma^2)): the mean kernel between two
// Gaussians is a Gaussian in the mean difference with inflated width.
double mmd_gaussian_closed_form(const GmmModel& p, const GmmModel& q,
                                double sigma);

}  // namespace cskl
