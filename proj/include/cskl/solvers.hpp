#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "cskl/models.hpp"
#include "cskl/sketch.hpp"

namespace cskl {

struct SolverOptions {
  int restarts = 10;              // candidate-search restarts per atom
  double tol = 1e-8;              // relative objective decrease stop
  int max_refine_iters = 300;
  Eigen::VectorXd box_lower;      // search domain, required for clomp_*
  Eigen::VectorXd box_upper;
  std::uint64_t seed = 0;
  double variance_floor = 1e-8;   // GMM only
  double ridge = 0.0;             // ls_regression only
  double condition_bound = 1e12;  // ls_regression only
};

// ||z - sum_l alpha_l A(p_theta_l)||^2 with Dirac atoms (centroids) or
// Gaussian atoms (mixtures).
double sketch_cost(const CentroidModel& model, const Sketch& sketch,
                   const FeatureMapSpec& spec);
double sketch_cost(const GmmModel& model, const Sketch& sketch,
                   const FeatureMapSpec& spec);
double sketch_cost(const LowRankPsd& model, const Sketch& sketch,
                   const FeatureMapSpec& spec);

// Lawson-Hanson active-set nonnegative least squares:
// min ||target - atoms * alpha||^2 s.t. alpha >= 0.
Eigen::VectorXd nnls(const Eigen::Ref<const Eigen::MatrixXd>& atoms,
                     const Eigen::Ref<const Eigen::VectorXd>& target);

// Greedy (CLOMP-R style) centroid recovery from an rff_complex sketch:
// k addition passes plus k replacement passes; each pass picks the atom
// maximizing the normalized residual correlation, reweights by NNLS, and
// jointly refines centroids and weights with monotone backtracking descent.
CentroidModel clomp_kmeans(const Sketch& sketch, std::size_t k,
                           const FeatureMapSpec& spec,
                           const SolverOptions& opts);

// Same greedy scheme over Gaussian atoms with diagonal covariance;
// variances kept positive through a log parameterization.
GmmModel clomp_gmm(const Sketch& sketch, std::size_t k,
                   const FeatureMapSpec& spec, const SolverOptions& opts);

// Burer-Monteiro fit of a rank-k PSD matrix R = U U^T to a quadratic-map
// sketch: min_U ||z - f(U)||^2 with f(U)_j = ||U^T w_j||^2, best of
// opts.restarts seeded gradient-descent runs.
LowRankPsd fit_lowrank_psd(const Sketch& sketch, std::size_t k,
                           const FeatureMapSpec& spec,
                           const SolverOptions& opts);

// Closed-form sketched least squares: reshape the outer_product sketch
// into the autocorrelation matrix and solve theta R22 = R12 (linear solve,
// never an explicit inverse). opts.ridge > 0 adds ridge * I to R22.
Eigen::MatrixXd ls_regression(const Sketch& sketch, std::size_t d1,
                              std::size_t d2, const FeatureMapSpec& spec,
                              const SolverOptions& opts = {});

// Converts a dithered 1-bit sketch into an effective rff_complex sketch
// for the same frequency operator: per coordinate, undo the dither phase
// and rescale by pi/2 (the reciprocal of the first-harmonic factor 2/pi).
// The result is solvable by the standard complex-atom solvers.
Sketch dequantize(const Sketch& sketch, const FeatureMapSpec& quantized_spec,
                  const FeatureMapSpec& complex_spec);

// Sorts components by descending weight, ties by lexicographic centroid /
// mean order. Applied to every solver output.
void canonicalize(CentroidModel& model);
void canonicalize(GmmModel& model);

}  // namespace cskl
