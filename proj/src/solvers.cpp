#include "cskl/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "cskl/errors.hpp"
#include "cskl/feature_map.hpp"
#include "cskl/rng.hpp"

namespace cskl {

namespace {

void check_sketch(const Sketch& sketch, const FeatureMapSpec& spec) {
  if (sketch.fingerprint != spec.fingerprint())
    throw IncompatibleSketchError("solver: sketch/spec fingerprint mismatch");
}

double residual_cost(const Eigen::VectorXcd& r) { return r.squaredNorm(); }

// ---------------------------------------------------------------------
// Atom families for the greedy solver. Parameters live in a flat real
// vector; the family knows how to evaluate the atom, its Jacobian, random
// initialization inside the search box, and projection back to the box.

struct DiracFamily {
  const FeatureMapSpec& spec;
  Eigen::VectorXd lo, hi;

  Eigen::Index param_dim() const { return lo.size(); }

  Eigen::VectorXcd atom(const Eigen::VectorXd& theta) const {
    return rff(spec, theta);
  }
  Eigen::MatrixXcd jacobian(const Eigen::VectorXd& theta) const {
    return dirac_atom_gradient(spec, theta);
  }
  Eigen::VectorXd random_init(Rng& rng) const {
    Eigen::VectorXd theta(lo.size());
    for (Eigen::Index t = 0; t < theta.size(); ++t)
      theta[t] = lo[t] + rng.uniform() * (hi[t] - lo[t]);
    return theta;
  }
  void project(Eigen::VectorXd& theta) const {
    theta = theta.cwiseMax(lo).cwiseMin(hi);
  }
  Eigen::VectorXd coordinate_scale() const { return hi - lo; }
};

// theta = [mu (d), log sigma2 (d)]
struct GaussianFamily {
  const FeatureMapSpec& spec;
  Eigen::VectorXd lo, hi;
  double variance_floor;

  Eigen::Index d() const { return lo.size(); }
  Eigen::Index param_dim() const { return 2 * lo.size(); }

  Eigen::VectorXcd atom(const Eigen::VectorXd& theta) const {
    return gaussian_atom(spec, theta.head(d()),
                         theta.tail(d()).array().exp().matrix());
  }
  Eigen::MatrixXcd jacobian(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd sigma2 = theta.tail(d()).array().exp().matrix();
    const GaussianAtomGradient g =
        gaussian_atom_gradient(spec, theta.head(d()), sigma2);
    Eigen::MatrixXcd J(g.d_mu.rows(), param_dim());
    J.leftCols(d()) = g.d_mu;
    // chain rule through sigma2 = exp(log sigma2)
    J.rightCols(d()) =
        g.d_sigma2 * sigma2.asDiagonal().toDenseMatrix()
                         .cast<std::complex<double>>();
    return J;
  }
  Eigen::VectorXd random_init(Rng& rng) const {
    Eigen::VectorXd theta(param_dim());
    for (Eigen::Index t = 0; t < d(); ++t) {
      theta[t] = lo[t] + rng.uniform() * (hi[t] - lo[t]);
      // randomized spread between 2% and 25% of the box width
      const double width = std::max(hi[t] - lo[t], 1e-12);
      const double frac = 0.02 + 0.23 * rng.uniform();
      theta[d() + t] = 2.0 * std::log(std::max(frac * width,
                                               std::sqrt(variance_floor)));
    }
    return theta;
  }
  void project(Eigen::VectorXd& theta) const {
    for (Eigen::Index t = 0; t < d(); ++t) {
      theta[t] = std::clamp(theta[t], lo[t], hi[t]);
      const double width = std::max(hi[t] - lo[t], 1e-12);
      const double lo_log = std::log(variance_floor);
      const double hi_log = 2.0 * std::log(width);
      theta[d() + t] = std::clamp(theta[d() + t], lo_log, hi_log);
    }
  }
  Eigen::VectorXd coordinate_scale() const {
    Eigen::VectorXd s(param_dim());
    s.head(d()) = hi - lo;
    s.tail(d()).setConstant(4.0);
    return s;
  }
};

// Normalized residual correlation Re<r, a(theta)> / ||a(theta)|| and its
// gradient in theta.
template <typename Family>
double correlation(const Family& fam, const Eigen::VectorXd& theta,
                   const Eigen::VectorXcd& r) {
  const Eigen::VectorXcd a = fam.atom(theta);
  const double norm = std::max(a.norm(), 1e-300);
  return (a.adjoint() * r).real()(0) / norm;
}

template <typename Family>
Eigen::VectorXd correlation_gradient(const Family& fam,
                                     const Eigen::VectorXd& theta,
                                     const Eigen::VectorXcd& r, double& value) {
  const Eigen::VectorXcd a = fam.atom(theta);
  const Eigen::MatrixXcd J = fam.jacobian(theta);
  const double norm = std::max(a.norm(), 1e-300);
  const double s = (a.adjoint() * r).real()(0);
  value = s / norm;
  const Eigen::VectorXd grad_s = (J.adjoint() * r).real();
  const Eigen::VectorXd grad_norm = (J.adjoint() * a).real() / norm;
  return (grad_s - value * grad_norm) / norm;
}

// Monotone hill climbing with per-coordinate scaling and an adaptive step;
// the correlation surface is rippled, so restarts (handled by the caller)
// matter more than a sophisticated local method.
template <typename Family>
double maximize_correlation(const Family& fam, const Eigen::VectorXcd& r,
                            Eigen::VectorXd& theta, int max_iters) {
  const Eigen::VectorXd scale = fam.coordinate_scale();
  double value = correlation(fam, theta, r);
  double step = 0.1;
  for (int iter = 0; iter < max_iters; ++iter) {
    double v = 0.0;
    Eigen::VectorXd grad = correlation_gradient(fam, theta, r, v);
    Eigen::VectorXd dir = grad.cwiseProduct(scale.cwiseAbs2());
    const double dir_norm = dir.cwiseQuotient(scale).norm();
    if (!(dir_norm > 1e-14)) break;
    dir /= dir_norm;  // unit length in box-scaled coordinates
    Eigen::VectorXd cand = theta + step * dir;
    fam.project(cand);
    const double cand_value = correlation(fam, cand, r);
    if (cand_value > value) {
      theta = cand;
      value = cand_value;
      step = std::min(step * 1.5, 1.0);
    } else {
      step *= 0.5;
      if (step < 1e-10) break;
    }
  }
  return value;
}

// Cost and gradient of ||z - sum_l alpha_l a(theta_l)||^2 over the stacked
// parameter vector [theta_1, ..., theta_t, alpha].
template <typename Family>
double joint_cost(const Family& fam, const Eigen::VectorXcd& z,
                  const std::vector<Eigen::VectorXd>& thetas,
                  const Eigen::VectorXd& alpha) {
  Eigen::VectorXcd r = z;
  for (std::size_t l = 0; l < thetas.size(); ++l)
    r -= alpha[static_cast<Eigen::Index>(l)] * fam.atom(thetas[l]);
  return residual_cost(r);
}

template <typename Family>
void refine_jointly(const Family& fam, const Eigen::VectorXcd& z,
                    std::vector<Eigen::VectorXd>& thetas,
                    Eigen::VectorXd& alpha, const SolverOptions& opts) {
  const std::size_t t = thetas.size();
  const Eigen::Index p = fam.param_dim();
  const Eigen::VectorXd scale = fam.coordinate_scale();
  double cost = joint_cost(fam, z, thetas, alpha);
  double step = 1.0;
  for (int iter = 0; iter < opts.max_refine_iters; ++iter) {
    // residual and gradients
    std::vector<Eigen::VectorXcd> atoms(t);
    Eigen::VectorXcd r = z;
    for (std::size_t l = 0; l < t; ++l) {
      atoms[l] = fam.atom(thetas[l]);
      r -= alpha[static_cast<Eigen::Index>(l)] * atoms[l];
    }
    Eigen::VectorXd grad_alpha(static_cast<Eigen::Index>(t));
    std::vector<Eigen::VectorXd> grad_theta(t);
    double grad_norm2 = 0.0;
    for (std::size_t l = 0; l < t; ++l) {
      const auto li = static_cast<Eigen::Index>(l);
      grad_alpha[li] = -2.0 * (atoms[l].adjoint() * r).real()(0);
      const Eigen::MatrixXcd J = fam.jacobian(thetas[l]);
      grad_theta[l] = -2.0 * alpha[li] * (J.adjoint() * r).real();
      grad_norm2 += grad_theta[l].squaredNorm() + grad_alpha[li] * grad_alpha[li];
    }
    if (!(grad_norm2 > 0.0)) break;

    // backtracking step on the scaled direction, alpha projected to >= 0
    const double m = static_cast<double>(z.size());
    bool accepted = false;
    double trial = std::min(step * 2.0, 1.0);
    for (int ls = 0; ls < 40; ++ls) {
      std::vector<Eigen::VectorXd> cand_thetas(t);
      Eigen::VectorXd cand_alpha(static_cast<Eigen::Index>(t));
      for (std::size_t l = 0; l < t; ++l) {
        const auto li = static_cast<Eigen::Index>(l);
        cand_thetas[l] =
            thetas[l] -
            (trial / (2.0 * m)) *
                grad_theta[l].cwiseProduct(scale.cwiseAbs2());
        fam.project(cand_thetas[l]);
        cand_alpha[li] = std::max(0.0, alpha[li] - (trial / (2.0 * m)) *
                                                       grad_alpha[li]);
      }
      const double cand_cost = joint_cost(fam, z, cand_thetas, cand_alpha);
      if (cand_cost < cost) {
        thetas = std::move(cand_thetas);
        alpha = std::move(cand_alpha);
        const double decrease = cost - cand_cost;
        cost = cand_cost;
        step = trial;
        accepted = true;
        if (decrease < opts.tol * (1.0 + cost)) return;
        break;
      }
      trial *= 0.5;
    }
    if (!accepted) break;
  }
}

// Weights by nonnegative least squares over the complex atoms, stacked as
// a 2m-row real system.
Eigen::VectorXd nnls_weights(const std::vector<Eigen::VectorXcd>& atoms,
                             const Eigen::VectorXcd& z) {
  const Eigen::Index m = z.size();
  const auto t = static_cast<Eigen::Index>(atoms.size());
  Eigen::MatrixXd A(2 * m, t);
  for (Eigen::Index l = 0; l < t; ++l) {
    A.col(l).head(m) = atoms[static_cast<std::size_t>(l)].real();
    A.col(l).tail(m) = atoms[static_cast<std::size_t>(l)].imag();
  }
  Eigen::VectorXd b(2 * m);
  b.head(m) = z.real();
  b.tail(m) = z.imag();
  return nnls(A, b);
}

template <typename Family>
struct ClompResult {
  std::vector<Eigen::VectorXd> thetas;
  Eigen::VectorXd alpha;
  double cost = std::numeric_limits<double>::infinity();
};

// CLOMP-R: k addition passes then k replacement passes (add one candidate,
// prune the lightest atom when the support exceeds k). The best state seen
// from pass k onward is returned, so replacement passes can only help.
template <typename Family>
ClompResult<Family> clomp(const Family& fam, const Eigen::VectorXcd& z,
                          std::size_t k, const SolverOptions& opts) {
  std::vector<Eigen::VectorXd> thetas;
  Eigen::VectorXd alpha;
  Eigen::VectorXcd residual = z;

  ClompResult<Family> best;
  const int restarts = std::max(1, opts.restarts);

  for (std::size_t pass = 0; pass < 2 * k; ++pass) {
    // (a) candidate search: best of `restarts` seeded hill climbs
    Eigen::VectorXd best_theta;
    double best_corr = -std::numeric_limits<double>::infinity();
    for (int rs = 0; rs < restarts; ++rs) {
      Rng rng(Rng::derive(opts.seed,
                          (static_cast<std::uint64_t>(pass) << 32) |
                              static_cast<std::uint64_t>(rs)));
      Eigen::VectorXd theta = fam.random_init(rng);
      const double corr = maximize_correlation(fam, residual, theta, 200);
      if (corr > best_corr) {  // exact ties keep the earlier restart
        best_corr = corr;
        best_theta = theta;
      }
    }
    thetas.push_back(best_theta);

    // (b)+(c) weights by NNLS; prune the smallest weight above support k
    std::vector<Eigen::VectorXcd> atoms;
    atoms.reserve(thetas.size());
    for (const auto& th : thetas) atoms.push_back(fam.atom(th));
    alpha = nnls_weights(atoms, z);
    if (thetas.size() > k) {
      Eigen::Index drop = 0;
      alpha.minCoeff(&drop);
      thetas.erase(thetas.begin() + drop);
      atoms.erase(atoms.begin() + drop);
      alpha = nnls_weights(atoms, z);
    }

    // (d) joint local refinement
    refine_jointly(fam, z, thetas, alpha, opts);

    residual = z;
    for (std::size_t l = 0; l < thetas.size(); ++l)
      residual -= alpha[static_cast<Eigen::Index>(l)] * fam.atom(thetas[l]);
    const double cost = residual_cost(residual);
    if (pass + 1 >= k && cost < best.cost) {
      best.thetas = thetas;
      best.alpha = alpha;
      best.cost = cost;
    }
  }
  if (!std::isfinite(best.cost))
    throw NumericalError("clomp: no finite-cost model found");
  // final simplex normalization restores the mixture reading
  const double total = best.alpha.sum();
  if (total > 0.0)
    best.alpha /= total;
  else
    best.alpha.setConstant(1.0 / static_cast<double>(best.alpha.size()));
  return best;
}

void check_box(const SolverOptions& opts, std::size_t d) {
  if (opts.box_lower.size() != static_cast<Eigen::Index>(d) ||
      opts.box_upper.size() != static_cast<Eigen::Index>(d))
    throw std::invalid_argument(
        "solver: search box (lower/upper, length d) must be supplied");
  if ((opts.box_upper.array() <= opts.box_lower.array()).any())
    throw std::invalid_argument("solver: box upper must exceed lower");
}

}  // namespace

double sketch_cost(const CentroidModel& model, const Sketch& sketch,
                   const FeatureMapSpec& spec) {
  check_sketch(sketch, spec);
  Eigen::VectorXcd r = sketch.values;
  for (Eigen::Index l = 0; l < model.centroids.rows(); ++l)
    r -= model.weights[l] * dirac_atom(spec, model.centroids.row(l).transpose());
  return residual_cost(r);
}

double sketch_cost(const GmmModel& model, const Sketch& sketch,
                   const FeatureMapSpec& spec) {
  check_sketch(sketch, spec);
  Eigen::VectorXcd r = sketch.values;
  for (Eigen::Index l = 0; l < model.means.rows(); ++l)
    r -= model.weights[l] * gaussian_atom(spec, model.means.row(l).transpose(),
                                          model.variances.row(l).transpose());
  return residual_cost(r);
}

double sketch_cost(const LowRankPsd& model, const Sketch& sketch,
                   const FeatureMapSpec& spec) {
  check_sketch(sketch, spec);
  if (spec.kind() != MapKind::quadratic)
    throw std::invalid_argument("sketch_cost: LowRankPsd needs quadratic map");
  const Eigen::MatrixXd& W = spec.op().matrix();
  const Eigen::VectorXd f = (W * model.factor).rowwise().squaredNorm();
  return (sketch.values.real() - f).squaredNorm();
}

Eigen::VectorXd nnls(const Eigen::Ref<const Eigen::MatrixXd>& atoms,
                     const Eigen::Ref<const Eigen::VectorXd>& target) {
  // Lawson-Hanson active set
  const Eigen::Index t = atoms.cols();
  if (t < 1) throw std::invalid_argument("nnls: need at least one column");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(t);
  std::vector<bool> passive(static_cast<std::size_t>(t), false);
  Eigen::VectorXd w = atoms.transpose() * target;
  const double tol = 1e-10 * std::max(1.0, w.cwiseAbs().maxCoeff());

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < t; ++i)
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
    Eigen::MatrixXd Ap(atoms.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c)
      Ap.col(static_cast<Eigen::Index>(c)) = atoms.col(idx[c]);
    const Eigen::VectorXd sol = Ap.colPivHouseholderQr().solve(target);
    z.setZero();
    for (std::size_t c = 0; c < idx.size(); ++c)
      z[idx[c]] = sol[static_cast<Eigen::Index>(c)];
  };

  for (int outer = 0; outer < 3 * static_cast<int>(t) + 30; ++outer) {
    w = atoms.transpose() * (target - atoms * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index i = 0; i < t; ++i)
      if (!passive[static_cast<std::size_t>(i)] && w[i] > best_w) {
        best_w = w[i];
        best = i;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    Eigen::VectorXd z(t);
    solve_passive(z);
    for (int inner = 0; inner < 2 * static_cast<int>(t) + 10; ++inner) {
      bool feasible = true;
      for (Eigen::Index i = 0; i < t; ++i)
        if (passive[static_cast<std::size_t>(i)] && z[i] <= 0.0) {
          feasible = false;
          break;
        }
      if (feasible) break;
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < t; ++i)
        if (passive[static_cast<std::size_t>(i)] && z[i] <= 0.0)
          alpha = std::min(alpha, x[i] / (x[i] - z[i]));
      x += alpha * (z - x);
      for (Eigen::Index i = 0; i < t; ++i)
        if (passive[static_cast<std::size_t>(i)] && x[i] <= 1e-14) {
          passive[static_cast<std::size_t>(i)] = false;
          x[i] = 0.0;
        }
      solve_passive(z);
    }
    x = z.cwiseMax(0.0);
  }
  return x;
}

void canonicalize(CentroidModel& model) {
  const Eigen::Index k = model.centroids.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (model.weights[a] != model.weights[b])
      return model.weights[a] > model.weights[b];
    return std::lexicographical_compare(
        model.centroids.row(a).begin(), model.centroids.row(a).end(),
        model.centroids.row(b).begin(), model.centroids.row(b).end());
  });
  Eigen::MatrixXd c(k, model.centroids.cols());
  Eigen::VectorXd w(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    c.row(i) = model.centroids.row(order[static_cast<std::size_t>(i)]);
    w[i] = model.weights[order[static_cast<std::size_t>(i)]];
  }
  model.centroids = std::move(c);
  model.weights = std::move(w);
}

void canonicalize(GmmModel& model) {
  const Eigen::Index k = model.means.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (model.weights[a] != model.weights[b])
      return model.weights[a] > model.weights[b];
    return std::lexicographical_compare(
        model.means.row(a).begin(), model.means.row(a).end(),
        model.means.row(b).begin(), model.means.row(b).end());
  });
  Eigen::MatrixXd mu(k, model.means.cols());
  Eigen::MatrixXd var(k, model.variances.cols());
  Eigen::VectorXd w(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    mu.row(i) = model.means.row(order[static_cast<std::size_t>(i)]);
    var.row(i) = model.variances.row(order[static_cast<std::size_t>(i)]);
    w[i] = model.weights[order[static_cast<std::size_t>(i)]];
  }
  model.means = std::move(mu);
  model.variances = std::move(var);
  model.weights = std::move(w);
}

CentroidModel clomp_kmeans(const Sketch& sketch, std::size_t k,
                           const FeatureMapSpec& spec,
                           const SolverOptions& opts) {
  check_sketch(sketch, spec);
  if (spec.kind() != MapKind::rff_complex)
    throw std::invalid_argument("clomp_kmeans: requires an rff_complex map");
  if (k == 0) throw std::invalid_argument("clomp_kmeans: k must be >= 1");
  if (k > spec.feature_dim())
    throw std::invalid_argument("clomp_kmeans: k exceeds sketch dimension");
  check_box(opts, spec.input_dim());

  DiracFamily fam{spec, opts.box_lower, opts.box_upper};
  const auto result = clomp(fam, sketch.values, k, opts);

  CentroidModel model;
  model.centroids.resize(static_cast<Eigen::Index>(result.thetas.size()),
                         static_cast<Eigen::Index>(spec.input_dim()));
  for (std::size_t l = 0; l < result.thetas.size(); ++l)
    model.centroids.row(static_cast<Eigen::Index>(l)) =
        result.thetas[l].transpose();
  model.weights = result.alpha;
  canonicalize(model);
  return model;
}

GmmModel clomp_gmm(const Sketch& sketch, std::size_t k,
                   const FeatureMapSpec& spec, const SolverOptions& opts) {
  check_sketch(sketch, spec);
  if (spec.kind() != MapKind::rff_complex)
    throw std::invalid_argument("clomp_gmm: requires an rff_complex map");
  if (k == 0) throw std::invalid_argument("clomp_gmm: k must be >= 1");
  if (k > spec.feature_dim())
    throw std::invalid_argument("clomp_gmm: k exceeds sketch dimension");
  check_box(opts, spec.input_dim());

  GaussianFamily fam{spec, opts.box_lower, opts.box_upper,
                     std::max(opts.variance_floor, 1e-300)};
  const auto result = clomp(fam, sketch.values, k, opts);

  const auto d = static_cast<Eigen::Index>(spec.input_dim());
  GmmModel model;
  model.means.resize(static_cast<Eigen::Index>(result.thetas.size()), d);
  model.variances.resize(model.means.rows(), d);
  for (std::size_t l = 0; l < result.thetas.size(); ++l) {
    model.means.row(static_cast<Eigen::Index>(l)) =
        result.thetas[l].head(d).transpose();
    model.variances.row(static_cast<Eigen::Index>(l)) =
        result.thetas[l].tail(d).array().exp().transpose();
  }
  model.weights = result.alpha;
  canonicalize(model);
  return model;
}

LowRankPsd fit_lowrank_psd(const Sketch& sketch, std::size_t k,
                           const FeatureMapSpec& spec,
                           const SolverOptions& opts) {
  check_sketch(sketch, spec);
  if (spec.kind() != MapKind::quadratic)
    throw std::invalid_argument("fit_lowrank_psd: requires a quadratic map");
  const std::size_t d = spec.input_dim();
  if (k == 0 || k > d)
    throw std::invalid_argument("fit_lowrank_psd: need 1 <= k <= d");

  const Eigen::MatrixXd& W = spec.op().matrix();
  const Eigen::VectorXd z = sketch.values.real();
  const double mean_row2 = W.rowwise().squaredNorm().mean();
  const double energy = std::max(z.mean(), 0.0);
  const double init_scale = std::sqrt(
      std::max(energy / std::max(mean_row2 * static_cast<double>(k), 1e-300),
               1e-12));

  LowRankPsd best;
  double best_cost = std::numeric_limits<double>::infinity();
  const int restarts = std::max(1, opts.restarts);
  for (int rs = 0; rs < restarts; ++rs) {
    Rng rng(Rng::derive(opts.seed, 0x70736400ULL + static_cast<std::uint64_t>(rs)));
    Eigen::MatrixXd U(static_cast<Eigen::Index>(d),
                      static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < U.size(); ++i)
      U.data()[i] = init_scale * rng.gaussian();

    Eigen::VectorXd f = (W * U).rowwise().squaredNorm();
    double cost = (z - f).squaredNorm();
    double step = 1.0;
    for (int iter = 0; iter < opts.max_refine_iters; ++iter) {
      const Eigen::MatrixXd WU = W * U;
      const Eigen::VectorXd r = z - WU.rowwise().squaredNorm();
      const Eigen::MatrixXd grad =
          -4.0 * W.transpose() * (r.asDiagonal() * WU);
      const double gnorm2 = grad.squaredNorm();
      if (!(gnorm2 > 0.0)) break;
      bool accepted = false;
      double trial = std::min(step * 2.0, 1e6);
      for (int ls = 0; ls < 60; ++ls) {
        const Eigen::MatrixXd cand = U - trial * grad;
        const double cand_cost =
            (z - (W * cand).rowwise().squaredNorm()).squaredNorm();
        if (cand_cost < cost) {
          const double decrease = cost - cand_cost;
          U = cand;
          cost = cand_cost;
          step = trial;
          accepted = true;
          if (decrease < opts.tol * (1.0 + cost)) iter = opts.max_refine_iters;
          break;
        }
        trial *= 0.5;
      }
      if (!accepted) break;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best.factor = U;
    }
  }
  return best;
}

Eigen::MatrixXd ls_regression(const Sketch& sketch, std::size_t d1,
                              std::size_t d2, const FeatureMapSpec& spec,
                              const SolverOptions& opts) {
  check_sketch(sketch, spec);
  if (spec.kind() != MapKind::outer_product)
    throw std::invalid_argument("ls_regression: requires outer_product map");
  const std::size_t d = spec.input_dim();
  if (d1 == 0 || d2 == 0 || d1 + d2 != d)
    throw std::invalid_argument("ls_regression: d1 + d2 must equal d");

  const auto di = static_cast<Eigen::Index>(d);
  const Eigen::VectorXd values = sketch.values.real();
  // column-major vec(x x^T) reshapes directly back to the matrix
  Eigen::MatrixXd autocorr =
      Eigen::Map<const Eigen::MatrixXd>(values.data(), di, di);
  autocorr = 0.5 * (autocorr + autocorr.transpose()).eval();

  const auto i1 = static_cast<Eigen::Index>(d1);
  const auto i2 = static_cast<Eigen::Index>(d2);
  const Eigen::MatrixXd r12 = autocorr.block(0, i1, i1, i2);
  Eigen::MatrixXd r22 = autocorr.block(i1, i1, i2, i2);
  if (opts.ridge > 0.0)
    r22.diagonal().array() += opts.ridge;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r22);
  const double ev_max = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double ev_min = eig.eigenvalues().minCoeff();
  if (!(ev_min > 0.0) || ev_max / ev_min > opts.condition_bound)
    throw NumericalError(
        "ls_regression: R22 is ill-conditioned; consider the ridge flag");

  // theta R22 = R12  <=>  R22 theta^T = R12^T (R22 symmetric)
  const Eigen::MatrixXd theta_t = r22.ldlt().solve(r12.transpose());
  return theta_t.transpose();
}

Sketch dequantize(const Sketch& sketch, const FeatureMapSpec& quantized_spec,
                  const FeatureMapSpec& complex_spec) {
  if (sketch.fingerprint != quantized_spec.fingerprint())
    throw IncompatibleSketchError("dequantize: sketch/spec mismatch");
  if (quantized_spec.kind() != MapKind::rff_quantized ||
      complex_spec.kind() != MapKind::rff_complex)
    throw std::invalid_argument("dequantize: kind mismatch");
  if (complex_spec.op().seed() != quantized_spec.op().seed() ||
      complex_spec.op().rows() != quantized_spec.op().rows() ||
      complex_spec.op().dim() != quantized_spec.op().dim() ||
      complex_spec.op().kind() != quantized_spec.op().kind() ||
      complex_spec.op().sigma_w() != quantized_spec.op().sigma_w())
    throw IncompatibleSketchError(
        "dequantize: specs must share the frequency operator");

  Sketch out;
  out.n = sketch.n;
  out.privacy = sketch.privacy;
  out.fingerprint = complex_spec.fingerprint();
  const Eigen::VectorXd& xi = quantized_spec.dither();
  out.values.resize(sketch.values.size());
  // undo the dither phase per coordinate, rescale by 1/c with c = 2/pi
  for (Eigen::Index j = 0; j < out.values.size(); ++j) {
    const double a = kTwoPi * xi[j];
    const std::complex<double> phase(std::cos(a), std::sin(a));
    out.values[j] = (M_PI / 2.0) * phase * sketch.values[j];
  }
  return out;
}

}  // namespace cskl
