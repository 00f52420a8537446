#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "cskl/errors.hpp"
#include "cskl/privacy.hpp"
#include "cskl/rng.hpp"
#include "cskl/sketch.hpp"

using namespace cskl;

namespace {

std::shared_ptr<const FrequencyOperator> shared_dense(std::size_t m,
                                                      std::size_t d,
                                                      double sigma_w,
                                                      std::uint64_t seed) {
  return std::make_shared<FrequencyOperator>(
      FrequencyOperator::build_dense(m, d, sigma_w, seed));
}

Eigen::MatrixXd random_rows(std::size_t n, std::size_t d, Rng& rng) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(n),
                       static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = rng.gaussian();
  return rows;
}

// flattened real coordinates of the additive noise
std::vector<double> noise_coords(const Sketch& noisy, const Sketch& clean) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * clean.values.size()));
  for (Eigen::Index j = 0; j < clean.values.size(); ++j) {
    out.push_back(noisy.values[j].real() - clean.values[j].real());
    out.push_back(noisy.values[j].imag() - clean.values[j].imag());
  }
  return out;
}

double sample_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(v.size() - 1));
}

double normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

}  // namespace

TEST_CASE("sensitivity closed forms") {
  const auto op = shared_dense(10, 2, 0.5, 1);
  {
    const auto spec = FeatureMapSpec::rff_complex(op);
    const SensitivityBounds b = sensitivity(spec, 100);
    CHECK(b.l1 == doctest::Approx(2.0 * std::sqrt(2.0) * 10.0 / 100.0));
    CHECK(b.l2 == doctest::Approx(2.0 * std::sqrt(10.0) / 100.0));
    const SensitivityBounds half = sensitivity(spec, 200);
    CHECK(half.l1 == doctest::Approx(b.l1 / 2.0));
    CHECK(half.l2 == doctest::Approx(b.l2 / 2.0));
    CHECK(b.l2 <= b.l1);
    CHECK(b.l1 <= b.l2 * std::sqrt(2.0 * 10.0) + 1e-12);
  }
  {
    const auto spec = FeatureMapSpec::rff_quantized(op, 3);
    const SensitivityBounds b = sensitivity(spec, 100);
    CHECK(b.l1 == doctest::Approx(0.2));
    CHECK(b.l2 == doctest::Approx(2.0 * std::sqrt(10.0) / 100.0));
  }
  {
    const auto spec = FeatureMapSpec::quadratic(op);
    CHECK_THROWS_AS(sensitivity(spec, 100), std::invalid_argument);
    const SensitivityBounds b = sensitivity(spec, 100, 2.0);
    const Eigen::VectorXd row2 = op->matrix().rowwise().squaredNorm();
    CHECK(b.l1 == doctest::Approx(row2.sum() * 4.0 / 100.0));
    CHECK(b.l2 == doctest::Approx(row2.norm() * 4.0 / 100.0));
  }
  CHECK_THROWS_AS(sensitivity(FeatureMapSpec::outer_product(2), 100),
                  std::invalid_argument);
}

TEST_CASE("replace-one changes never exceed the analytic bounds") {
  const std::size_t m = 10, d = 2, n = 100;
  const auto op = shared_dense(m, d, 0.5, 2);
  Rng rng(7);
  for (int which = 0; which < 2; ++which) {
    const FeatureMapSpec spec = which == 0
                                    ? FeatureMapSpec::rff_complex(op)
                                    : FeatureMapSpec::rff_quantized(op, 9);
    const SensitivityBounds b = sensitivity(spec, n);
    for (int trial = 0; trial < 1000; ++trial) {
      Eigen::MatrixXd rows = random_rows(n, d, rng);
      const Sketch s1 = sketch_dataset(rows, spec);
      const auto idx = static_cast<Eigen::Index>(rng.uniform() * double(n));
      for (Eigen::Index t = 0; t < rows.cols(); ++t)
        rows(idx, t) = 3.0 * rng.gaussian();
      const Sketch s2 = sketch_dataset(rows, spec);
      double l1 = 0.0, l2 = 0.0;
      for (Eigen::Index j = 0; j < s1.values.size(); ++j) {
        const std::complex<double> delta = s1.values[j] - s2.values[j];
        l1 += std::fabs(delta.real()) + std::fabs(delta.imag());
        l2 += std::norm(delta);
      }
      CHECK(l1 <= b.l1 * (1.0 + 1e-9));
      CHECK(std::sqrt(l2) <= b.l2 * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("antipodal construction saturates the bounds") {
  // single frequency w = 1: replacing x by x + 1/2 flips the phase exactly,
  // and x = -1/8 puts the change on the l1-extremal diagonal
  Eigen::MatrixXd W(1, 1);
  W << 1.0;
  const auto op = std::make_shared<FrequencyOperator>(
      FrequencyOperator::from_matrix(W));
  const auto spec = FeatureMapSpec::rff_complex(op);
  const std::size_t n = 50;
  Eigen::MatrixXd rows = Eigen::MatrixXd::Constant(n, 1, 0.3);
  rows(0, 0) = -0.125;
  const Sketch s1 = sketch_dataset(rows, spec);
  rows(0, 0) = -0.125 + 0.5;
  const Sketch s2 = sketch_dataset(rows, spec);
  const std::complex<double> delta = s1.values[0] - s2.values[0];
  const SensitivityBounds b = sensitivity(spec, n);
  const double l1 = std::fabs(delta.real()) + std::fabs(delta.imag());
  CHECK(l1 >= 0.5 * b.l1);
  CHECK(l1 == doctest::Approx(b.l1).epsilon(1e-10));
  CHECK(std::abs(delta) == doctest::Approx(b.l2).epsilon(1e-10));
}

TEST_CASE("laplace noise moments match the configured scale") {
  const std::size_t m = 50000, n = 1000;
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(m, 2, 0.5, 3));
  Rng rng(11);
  const Sketch clean = sketch_dataset(random_rows(20, 2, rng), spec);
  Sketch base = clean;
  base.n = n;  // pretend count so the scale is known without sketching 10^3 rows
  const double epsilon = 0.7;
  const Sketch noisy = privatize_laplace(base, spec, epsilon, 99);
  REQUIRE(noisy.sealed());
  CHECK(noisy.privacy->mechanism == DpMechanism::laplace);
  CHECK(noisy.privacy->epsilon == epsilon);

  const double scale = sensitivity(spec, n).l1 / epsilon;
  const auto noise = noise_coords(noisy, base);
  CHECK(noise.size() == 2 * m);
  // Laplace(b) has standard deviation sqrt(2) b
  CHECK(sample_std(noise) ==
        doctest::Approx(std::sqrt(2.0) * scale).epsilon(0.02));
}

TEST_CASE("huge epsilon leaves the sketch essentially untouched") {
  const std::size_t m = 100, n = 10000;
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(m, 2, 0.5, 4));
  Rng rng(12);
  Sketch s = sketch_dataset(random_rows(50, 2, rng), spec);
  s.n = n;
  const Sketch noisy = privatize_laplace(s, spec, 1e6, 5);
  double max_dev = 0.0;
  for (double v : noise_coords(noisy, s)) max_dev = std::max(max_dev, std::fabs(v));
  CHECK(max_dev < 1e-3);
}

TEST_CASE("privatization is seed deterministic") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(16, 2, 0.5, 5));
  Rng rng(13);
  const Sketch s = sketch_dataset(random_rows(30, 2, rng), spec);
  const Sketch a = privatize_laplace(s, spec, 1.0, 42);
  const Sketch b = privatize_laplace(s, spec, 1.0, 42);
  const Sketch c = privatize_laplace(s, spec, 1.0, 43);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);

  const Sketch g1 = privatize_gaussian(s, spec, 0.5, 1e-6, 42);
  const Sketch g2 = privatize_gaussian(s, spec, 0.5, 1e-6, 42);
  CHECK(g1.values == g2.values);
}

TEST_CASE("gaussian mechanism sigma follows the classic formula") {
  const std::size_t m = 50000, n = 10000;
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(m, 2, 0.5, 6));
  Rng rng(14);
  Sketch s = sketch_dataset(random_rows(20, 2, rng), spec);
  s.n = n;
  const double epsilon = 1.0, delta = 1e-5;
  const Sketch noisy = privatize_gaussian(s, spec, epsilon, delta, 77);
  REQUIRE(noisy.sealed());
  CHECK(noisy.privacy->delta == delta);

  const double l2 = 2.0 * std::sqrt(double(m)) / double(n);
  const double sigma = l2 * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
  const auto noise = noise_coords(noisy, s);
  CHECK(sample_std(noise) == doctest::Approx(sigma).epsilon(0.02));

  // smaller delta means strictly more noise
  const Sketch tighter = privatize_gaussian(s, spec, epsilon, 1e-12, 77);
  CHECK(sample_std(noise_coords(tighter, s)) > sample_std(noise));
}

TEST_CASE("gaussian noise passes a normality KS test") {
  const std::size_t m = 50000, n = 10000;
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(m, 2, 0.5, 7));
  Rng rng(15);
  Sketch s = sketch_dataset(random_rows(20, 2, rng), spec);
  s.n = n;
  const double delta = 1e-5;
  const Sketch noisy = privatize_gaussian(s, spec, 1.0, delta, 88);
  const double sigma = sensitivity(spec, n).l2 *
                       std::sqrt(2.0 * std::log(1.25 / delta));

  std::vector<double> z = noise_coords(noisy, s);
  for (double& v : z) v /= sigma;
  std::sort(z.begin(), z.end());
  double ks = 0.0;
  const double count = static_cast<double>(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = normal_cdf(z[i]);
    ks = std::max(ks, std::fabs(f - static_cast<double>(i) / count));
    ks = std::max(ks, std::fabs(static_cast<double>(i + 1) / count - f));
  }
  // one-sample KS critical value at alpha = 0.01
  CHECK(ks < 1.63 / std::sqrt(count));
}

TEST_CASE("privatization rejects invalid inputs") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(8, 2, 0.5, 8));
  Rng rng(16);
  const Sketch s = sketch_dataset(random_rows(10, 2, rng), spec);
  CHECK_THROWS_AS(privatize_laplace(s, spec, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(privatize_laplace(s, spec, -1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(privatize_gaussian(s, spec, 1.5, 1e-5, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(privatize_gaussian(s, spec, 0.5, 0.0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(privatize_gaussian(s, spec, 0.5, 1.0, 1),
                  std::invalid_argument);

  const Sketch sealed = privatize_laplace(s, spec, 1.0, 1);
  CHECK_THROWS_AS(privatize_laplace(sealed, spec, 1.0, 2), SealedSketchError);
  CHECK_THROWS_AS(privatize_gaussian(sealed, spec, 0.5, 1e-5, 2),
                  SealedSketchError);

  const auto other = FeatureMapSpec::rff_complex(shared_dense(8, 2, 0.5, 9));
  CHECK_THROWS_AS(privatize_laplace(s, other, 1.0, 1),
                  IncompatibleSketchError);
}
