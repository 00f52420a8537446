#include "cskl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cskl/errors.hpp"
#include "cskl/rng.hpp"

namespace cskl {

namespace {

constexpr double kVarianceFloor = 1e-8;

// k-means++ seeding: first centroid uniform, then D^2-weighted.
Eigen::MatrixXd kmeanspp_init(const Eigen::Ref<const Eigen::MatrixXd>& data,
                              std::size_t k, Rng& rng) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (static_cast<Eigen::Index>(k) > n)
    throw std::invalid_argument("kmeans: k exceeds sample count");
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), d);
  const Eigen::Index first =
      static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n));
  centroids.row(0) = data.row(std::min(first, n - 1));
  Eigen::VectorXd dist2 =
      (data.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    const double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= dist2[i];
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n));
      pick = std::min(pick, n - 1);
    }
    centroids.row(static_cast<Eigen::Index>(c)) = data.row(pick);
    dist2 = dist2.cwiseMin(
        (data.rowwise() - centroids.row(static_cast<Eigen::Index>(c)))
            .rowwise()
            .squaredNorm());
  }
  return centroids;
}

double log_gaussian_diag(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& mu,
                         const Eigen::Ref<const Eigen::VectorXd>& var) {
  double out = -0.5 * static_cast<double>(x.size()) *
               std::log(2.0 * M_PI);
  for (Eigen::Index t = 0; t < x.size(); ++t) {
    const double diff = x[t] - mu[t];
    out -= 0.5 * (std::log(var[t]) + diff * diff / var[t]);
  }
  return out;
}

}  // namespace

SyntheticData synth_gmm(const SyntheticSpec& spec) {
  if (spec.k == 0 || spec.d == 0 || spec.n == 0)
    throw std::invalid_argument("synth_gmm: k, d, n must be >= 1");
  if (!(spec.separation > 0.0))
    throw std::invalid_argument("synth_gmm: separation must be > 0");
  const auto k = static_cast<Eigen::Index>(spec.k);
  const auto d = static_cast<Eigen::Index>(spec.d);

  Eigen::VectorXd weights;
  if (spec.weights) {
    weights = *spec.weights;
    if (weights.size() != k || (weights.array() < 0.0).any())
      throw std::invalid_argument("synth_gmm: bad weight vector");
    weights /= weights.sum();
  } else {
    weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  }

  // Means sampled uniformly in a box wide enough for the requested
  // separation; rejection with a retry budget.
  const double min_dist = spec.separation * spec.sigma;
  const double half_width =
      0.5 * min_dist * std::max(2.0, std::pow(static_cast<double>(spec.k),
                                              1.0 / static_cast<double>(spec.d)) *
                                         2.0);
  Rng rng(Rng::derive(spec.seed, 0x6d65616e));
  Eigen::MatrixXd means(k, d);
  const int max_retries = 20000;
  int retries = 0;
  for (Eigen::Index c = 0; c < k;) {
    for (Eigen::Index t = 0; t < d; ++t)
      means(c, t) = (2.0 * rng.uniform() - 1.0) * half_width;
    bool ok = true;
    for (Eigen::Index p = 0; p < c && ok; ++p)
      if ((means.row(c) - means.row(p)).norm() < min_dist) ok = false;
    if (ok) {
      ++c;
    } else if (++retries > max_retries) {
      throw std::runtime_error(
          "synth_gmm: could not place separated means (separation too large)");
    }
  }

  SyntheticData out;
  out.rows.resize(static_cast<Eigen::Index>(spec.n), d);
  out.labels.resize(spec.n);
  Rng draw(Rng::derive(spec.seed, 0x73616d70));
  for (std::size_t i = 0; i < spec.n; ++i) {
    double u = draw.uniform();
    Eigen::Index comp = k - 1;
    for (Eigen::Index c = 0; c < k; ++c) {
      u -= weights[c];
      if (u <= 0.0) {
        comp = c;
        break;
      }
    }
    out.labels[i] = static_cast<std::size_t>(comp);
    for (Eigen::Index t = 0; t < d; ++t)
      out.rows(static_cast<Eigen::Index>(i), t) =
          means(comp, t) + spec.sigma * draw.gaussian();
  }
  out.truth.weights = weights;
  out.truth.means = means;
  out.truth.variances =
      Eigen::MatrixXd::Constant(k, d, spec.sigma * spec.sigma);
  return out;
}

CentroidModel lloyd_kmeans(const Eigen::Ref<const Eigen::MatrixXd>& data,
                           std::size_t k, std::uint64_t seed) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (k == 0) throw std::invalid_argument("lloyd_kmeans: k must be >= 1");
  Rng rng(seed);
  Eigen::MatrixXd centroids = kmeanspp_init(data, k, rng);

  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), -1);
  const int max_iters = 300;
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double dist = (data.row(i) - centroids.row(c)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centroids.rows(), d);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(centroids.rows());
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += data.row(i);
      counts[assign[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      if (counts[c] > 0.0) {
        centroids.row(c) = sums.row(c) / counts[c];
      } else {
        // reseed to the farthest point from its centroid
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double dist =
              (data.row(i) -
               centroids.row(assign[static_cast<std::size_t>(i)]))
                  .squaredNorm();
          if (dist > far_d) {
            far_d = dist;
            far = i;
          }
        }
        centroids.row(c) = data.row(far);
      }
    }
  }

  CentroidModel model;
  model.centroids = centroids;
  model.weights = Eigen::VectorXd::Zero(centroids.rows());
  for (Eigen::Index i = 0; i < n; ++i)
    model.weights[assign[static_cast<std::size_t>(i)]] += 1.0;
  model.weights /= static_cast<double>(n);
  return model;
}

GmmModel em_gmm(const Eigen::Ref<const Eigen::MatrixXd>& data, std::size_t k,
                std::uint64_t seed) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (k == 0) throw std::invalid_argument("em_gmm: k must be >= 1");
  Rng rng(seed);

  GmmModel model;
  model.means = kmeanspp_init(data, k, rng);
  model.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k),
                                            1.0 / static_cast<double>(k));
  const Eigen::RowVectorXd mean = data.colwise().mean();
  Eigen::RowVectorXd var =
      ((data.rowwise() - mean).array().square().colwise().sum() /
       static_cast<double>(n))
          .matrix();
  var = var.cwiseMax(kVarianceFloor);
  model.variances = var.replicate(static_cast<Eigen::Index>(k), 1);

  double prev_ll = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd resp(n, static_cast<Eigen::Index>(k));
  const int max_iters = 300;
  for (int iter = 0; iter < max_iters; ++iter) {
    // E-step with log-sum-exp
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd logp(static_cast<Eigen::Index>(k));
      for (Eigen::Index c = 0; c < logp.size(); ++c)
        logp[c] = std::log(std::max(model.weights[c], 1e-300)) +
                  log_gaussian_diag(data.row(i).transpose(),
                                    model.means.row(c).transpose(),
                                    model.variances.row(c).transpose());
      const double mx = logp.maxCoeff();
      const double lse = mx + std::log((logp.array() - mx).exp().sum());
      resp.row(i) = (logp.array() - lse).exp().transpose();
      ll += lse;
    }
    // classic EM monotonicity; a real decrease indicates a bug
    if (ll + 1e-8 * (1.0 + std::fabs(ll)) < prev_ll)
      throw NumericalError("em_gmm: log-likelihood decreased");
    const bool converged =
        iter > 0 && (ll - prev_ll) < 1e-10 * (1.0 + std::fabs(ll));
    prev_ll = ll;
    if (converged) break;

    // M-step
    const Eigen::VectorXd nk = resp.colwise().sum().transpose();
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k); ++c) {
      const double denom = std::max(nk[c], 1e-300);
      model.weights[c] = nk[c] / static_cast<double>(n);
      model.means.row(c) = (resp.col(c).transpose() * data) / denom;
      Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(d);
      for (Eigen::Index i = 0; i < n; ++i)
        v += resp(i, c) *
             (data.row(i) - model.means.row(c)).array().square().matrix();
      model.variances.row(c) = (v / denom).cwiseMax(kVarianceFloor);
    }
  }
  return model;
}

Eigen::MatrixXd exact_pca(const Eigen::Ref<const Eigen::MatrixXd>& data,
                          std::size_t k) {
  const Eigen::Index d = data.cols();
  if (k == 0 || static_cast<Eigen::Index>(k) > d)
    throw std::invalid_argument("exact_pca: need 1 <= k <= d");
  const Eigen::MatrixXd autocorr =
      data.transpose() * data / static_cast<double>(data.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(autocorr);
  Eigen::MatrixXd basis(d, static_cast<Eigen::Index>(k));
  // eigenvalues ascend; take the top k in descending order
  for (std::size_t c = 0; c < k; ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - static_cast<Eigen::Index>(c));
    Eigen::Index argmax = 0;
    v.cwiseAbs().maxCoeff(&argmax);
    if (v[argmax] < 0.0) v = -v;
    basis.col(static_cast<Eigen::Index>(c)) = v;
  }
  return basis;
}

double kmeans_sse(const Eigen::Ref<const Eigen::MatrixXd>& data,
                  const Eigen::Ref<const Eigen::MatrixXd>& centroids) {
  double sse = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c)
      best = std::min(best, (data.row(i) - centroids.row(c)).squaredNorm());
    sse += best;
  }
  return sse;
}

double empirical_risk(Task task, const CentroidModel& model,
                      const Eigen::Ref<const Eigen::MatrixXd>& data) {
  if (task != Task::kmeans)
    throw std::invalid_argument("empirical_risk: centroid model is k-means");
  return kmeans_sse(data, model.centroids) / static_cast<double>(data.rows());
}

double empirical_risk(Task task, const GmmModel& model,
                      const Eigen::Ref<const Eigen::MatrixXd>& data) {
  if (task != Task::gmm)
    throw std::invalid_argument("empirical_risk: GMM model is gmm task");
  double nll = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    Eigen::VectorXd logp(static_cast<Eigen::Index>(model.k()));
    for (Eigen::Index c = 0; c < logp.size(); ++c)
      logp[c] = std::log(std::max(model.weights[c], 1e-300)) +
                log_gaussian_diag(data.row(i).transpose(),
                                  model.means.row(c).transpose(),
                                  model.variances.row(c).transpose());
    const double mx = logp.maxCoeff();
    nll -= mx + std::log((logp.array() - mx).exp().sum());
  }
  return nll / static_cast<double>(data.rows());
}

double empirical_risk(Task task,
                      const Eigen::Ref<const Eigen::MatrixXd>& basis_or_theta,
                      const Eigen::Ref<const Eigen::MatrixXd>& data,
                      std::size_t d1) {
  const double n = static_cast<double>(data.rows());
  if (task == Task::pca) {
    // negative captured energy, so smaller is better like the other tasks
    return -(data * basis_or_theta).squaredNorm() / n;
  }
  if (task == Task::regress) {
    if (d1 == 0 || static_cast<Eigen::Index>(d1) >= data.cols())
      throw std::invalid_argument("empirical_risk: bad d1 split");
    const auto i1 = static_cast<Eigen::Index>(d1);
    const Eigen::MatrixXd x1 = data.leftCols(i1);
    const Eigen::MatrixXd x2 = data.rightCols(data.cols() - i1);
    return (x1 - x2 * basis_or_theta.transpose()).squaredNorm() / n;
  }
  throw std::invalid_argument("empirical_risk: unsupported task overload");
}

double parzen_score(const Eigen::Ref<const Eigen::MatrixXd>& data,
                    const Eigen::Ref<const Eigen::VectorXd>& c, double sigma) {
  double acc = 0.0;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    acc += std::exp(-(data.row(i).transpose() - c).squaredNorm() * inv);
  return acc / static_cast<double>(data.rows());
}

namespace {

// Mean kernel <g_sigma * p_a, p_b> between two diagonal Gaussians: the
// difference X - X' is N(mu_a - mu_b, S_a + S_b), and E[g_sigma(Z)] for
// Z ~ N(delta, S) factorizes per coordinate.
double gaussian_pair_kernel(const Eigen::RowVectorXd& mu_a,
                            const Eigen::RowVectorXd& var_a,
                            const Eigen::RowVectorXd& mu_b,
                            const Eigen::RowVectorXd& var_b, double sigma) {
  const double s2 = sigma * sigma;
  double out = 1.0;
  for (Eigen::Index t = 0; t < mu_a.size(); ++t) {
    const double total = s2 + var_a[t] + var_b[t];
    const double delta = mu_a[t] - mu_b[t];
    out *= std::sqrt(s2 / total) * std::exp(-delta * delta / (2.0 * total));
  }
  return out;
}

double mixture_mean_kernel(const GmmModel& p, const GmmModel& q,
                           double sigma) {
  double out = 0.0;
  for (Eigen::Index a = 0; a < p.weights.size(); ++a)
    for (Eigen::Index b = 0; b < q.weights.size(); ++b)
      out += p.weights[a] * q.weights[b] *
             gaussian_pair_kernel(p.means.row(a), p.variances.row(a),
                                  q.means.row(b), q.variances.row(b), sigma);
  return out;
}

}  // namespace

double mmd_gaussian_closed_form(const GmmModel& p, const GmmModel& q,
                                double sigma) {
  const double kpp = mixture_mean_kernel(p, p, sigma);
  const double kqq = mixture_mean_kernel(q, q, sigma);
  const double kpq = mixture_mean_kernel(p, q, sigma);
  return std::sqrt(std::max(0.0, kpp + kqq - 2.0 * kpq));
}

}  // namespace cskl
