#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "cskl/baselines.hpp"
#include "cskl/errors.hpp"
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

Eigen::MatrixXd random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(n),
                       static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = 0; j < rows.cols(); ++j)
      rows(i, j) = rng.gaussian();
  return rows;
}

}  // namespace

TEST_CASE("sketch of identical rows equals the feature vector") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(12, 3, 0.8, 1));
  Eigen::VectorXd x(3);
  x << 0.5, -1.0, 2.0;
  Eigen::MatrixXd rows(50, 3);
  for (int i = 0; i < 50; ++i) rows.row(i) = x.transpose();
  const Sketch s = sketch_dataset(rows, spec);
  CHECK(s.n == 50);
  CHECK((s.values - rff(spec, x)).norm() <= 1e-14 * std::sqrt(12.0));
}

TEST_CASE("empty stream yields the zero sketch") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(8, 2, 1.0, 2));
  const Sketch s = sketch_dataset(Eigen::MatrixXd(0, 2), spec);
  CHECK(s.n == 0);
  CHECK(s.values.norm() == 0.0);
}

TEST_CASE("streaming mean equals the two-pass mean") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(16, 4, 0.6, 3));
  const Eigen::MatrixXd rows = random_rows(1000, 4, 7);
  const Sketch s = sketch_dataset(rows, spec);
  Eigen::VectorXcd direct = Eigen::VectorXcd::Zero(16);
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    direct += rff(spec, rows.row(i).transpose());
  direct /= double(rows.rows());
  CHECK((s.values - direct).norm() <= 1e-12 * direct.norm());
}

TEST_CASE("dimension drift aborts with the row index") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(4, 3, 1.0, 4));
  Eigen::MatrixXd bad = random_rows(5, 2, 1);
  CHECK_THROWS_AS(sketch_dataset(bad, spec), std::invalid_argument);

  // streaming variant reports the offending row
  int row = 0;
  auto next = [&](Eigen::VectorXd& x) {
    if (row >= 4) return false;
    x = Eigen::VectorXd::Zero(row == 2 ? 2 : 3);
    ++row;
    return true;
  };
  try {
    sketch_dataset(next, spec);
    FAIL("expected a dimension error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("merge algebra") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(8, 2, 0.9, 5));

  // equal values stay fixed regardless of counts
  Eigen::MatrixXd ones = Eigen::MatrixXd::Zero(1, 2);
  Sketch a = sketch_dataset(ones, spec);
  Sketch b = sketch_dataset(ones.replicate(7, 1), spec);
  Sketch m = merge(a, b);
  CHECK(m.n == 8);
  CHECK((m.values - a.values).norm() <= 1e-14);

  // n1=1 value a, n2=3 value b -> (a+3b)/4
  Eigen::MatrixXd r1 = random_rows(1, 2, 10);
  Eigen::MatrixXd r3 = random_rows(3, 2, 11);
  r3.row(1) = r3.row(0);
  r3.row(2) = r3.row(0);
  const Sketch s1 = sketch_dataset(r1, spec);
  const Sketch s3 = sketch_dataset(r3, spec);
  const Sketch ms = merge(s1, s3);
  CHECK((ms.values - (s1.values + 3.0 * s3.values) / 4.0).norm() <= 1e-14);

  // concatenated-dataset oracle on random splits
  const Eigen::MatrixXd rows = random_rows(257, 2, 12);
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index cut =
        1 + static_cast<Eigen::Index>(rng.uniform() * 255.0);
    const Sketch left = sketch_dataset(rows.topRows(cut), spec);
    const Sketch right = sketch_dataset(rows.bottomRows(rows.rows() - cut), spec);
    const Sketch whole = sketch_dataset(rows, spec);
    const Sketch merged = merge(left, right);
    CHECK(merged.n == whole.n);
    CHECK((merged.values - whole.values).norm() <= 1e-12 * whole.values.norm());
  }
}

TEST_CASE("merge rejects incompatible or sealed inputs") {
  const auto spec1 = FeatureMapSpec::rff_complex(shared_dense(8, 2, 1.0, 1));
  const auto spec2 = FeatureMapSpec::rff_complex(shared_dense(8, 2, 1.0, 2));
  const Sketch s1 = sketch_dataset(random_rows(5, 2, 1), spec1);
  const Sketch s2 = sketch_dataset(random_rows(5, 2, 2), spec2);
  CHECK_THROWS_AS(merge(s1, s2), IncompatibleSketchError);

  Sketch sealed = s1;
  sealed.privacy = PrivacyRecord{DpMechanism::laplace, 1.0, 0.0};
  CHECK_THROWS_AS(merge(sealed, s1), SealedSketchError);
  CHECK_THROWS_AS(update(sealed, Eigen::VectorXd::Zero(2), spec1),
                  SealedSketchError);
  CHECK_THROWS_AS(remove(sealed, Eigen::VectorXd::Zero(2), spec1),
                  SealedSketchError);
}

TEST_CASE("update and delete are exact inverses") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(10, 2, 0.7, 6));
  const Sketch s = sketch_dataset(random_rows(20, 2, 20), spec);
  Eigen::VectorXd x(2);
  x << 1.0, -0.5;
  const Sketch back = remove(update(s, x, spec), x, spec);
  CHECK(back.n == s.n);
  CHECK((back.values - s.values).norm() <= 1e-12 * s.values.norm());

  Sketch empty;
  empty.values = Eigen::VectorXcd::Zero(10);
  empty.n = 0;
  empty.fingerprint = spec.fingerprint();
  const Sketch one = update(empty, x, spec);
  CHECK(one.n == 1);
  CHECK((one.values - rff(spec, x)).norm() <= 1e-15);
  CHECK(remove(one, x, spec).values.norm() == 0.0);
  CHECK_THROWS_AS(remove(empty, x, spec), std::invalid_argument);
}

TEST_CASE("interleaved updates and deletes replay the surviving multiset") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(12, 2, 0.8, 7));
  const Eigen::MatrixXd pool = random_rows(40, 2, 30);
  Rng rng(31);
  Sketch s;
  s.values = Eigen::VectorXcd::Zero(12);
  s.fingerprint = spec.fingerprint();
  std::vector<int> alive;
  for (int step = 0; step < 100; ++step) {
    const bool do_delete = !alive.empty() && rng.uniform() < 0.4;
    if (do_delete) {
      const auto pos = static_cast<std::size_t>(rng.uniform() * alive.size());
      s = remove(s, pool.row(alive[pos]).transpose(), spec);
      alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(pos));
    } else {
      const int idx = static_cast<int>(rng.uniform() * 40.0);
      s = update(s, pool.row(idx).transpose(), spec);
      alive.push_back(idx);
    }
  }
  Eigen::MatrixXd survivors(static_cast<Eigen::Index>(alive.size()), 2);
  for (std::size_t i = 0; i < alive.size(); ++i)
    survivors.row(static_cast<Eigen::Index>(i)) = pool.row(alive[i]);
  const Sketch direct = sketch_dataset(survivors, spec);
  CHECK(s.n == direct.n);
  CHECK((s.values - direct.values).norm() <=
        1e-10 * std::max(1.0, direct.values.norm()));
}

TEST_CASE("permutation invariance") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(8, 3, 1.1, 8));
  Eigen::MatrixXd rows = random_rows(64, 3, 40);
  const Sketch fwd = sketch_dataset(rows, spec);
  Eigen::MatrixXd rev = rows.colwise().reverse();
  const Sketch bwd = sketch_dataset(rev, spec);
  CHECK((fwd.values - bwd.values).norm() <= 1e-12 * fwd.values.norm());
}

TEST_CASE("rff sketch coordinates stay inside the unit disk") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(16, 2, 1.3, 9));
  const Sketch s = sketch_dataset(random_rows(5000, 2, 50), spec);
  for (Eigen::Index j = 0; j < s.values.size(); ++j)
    CHECK(std::abs(s.values[j]) <= 1.0 + 1e-12);
}

TEST_CASE("binary round trip") {
  const auto op = shared_dense(8, 2, 0.75, 101);
  for (const FeatureMapSpec& spec :
       {FeatureMapSpec::rff_complex(op), FeatureMapSpec::rff_quantized(op, 7),
        FeatureMapSpec::quadratic(op)}) {
    const Sketch s = sketch_dataset(random_rows(33, 2, 60), spec);
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    serialize(s, spec, buf);
    const LoadedSketch loaded = deserialize(buf);
    CHECK(loaded.sketch.n == s.n);
    CHECK(loaded.sketch.fingerprint == s.fingerprint);
    CHECK(loaded.spec.fingerprint() == spec.fingerprint());
    CHECK(loaded.sketch.values == s.values);
    CHECK(!loaded.sketch.sealed());
  }

  // outer_product has no operator but still round-trips
  const auto ospec = FeatureMapSpec::outer_product(2);
  const Sketch os = sketch_dataset(random_rows(10, 2, 61), ospec);
  const auto bytes = serialize(os, ospec);
  const LoadedSketch oloaded = deserialize(bytes);
  CHECK(oloaded.sketch.values == os.values);
  CHECK(oloaded.spec.kind() == MapKind::outer_product);
}

TEST_CASE("privacy record survives the round trip and stays sealed") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(6, 2, 1.0, 102));
  Sketch s = sketch_dataset(random_rows(10, 2, 62), spec);
  s.privacy = PrivacyRecord{DpMechanism::gaussian, 0.5, 1e-6};
  const auto bytes = serialize(s, spec);
  const LoadedSketch loaded = deserialize(bytes);
  REQUIRE(loaded.sketch.sealed());
  CHECK(loaded.sketch.privacy->mechanism == DpMechanism::gaussian);
  CHECK(loaded.sketch.privacy->epsilon == 0.5);
  CHECK(loaded.sketch.privacy->delta == 1e-6);
}

TEST_CASE("corrupted input raises format errors") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(4, 2, 1.0, 103));
  const Sketch s = sketch_dataset(random_rows(3, 2, 63), spec);
  auto bytes = serialize(s, spec);

  auto corrupted = bytes;
  corrupted[0] = 'X';
  CHECK_THROWS_AS(deserialize(corrupted), FormatError);

  auto truncated = bytes;
  truncated.resize(truncated.size() / 2);
  CHECK_THROWS_AS(deserialize(truncated), FormatError);

  auto bad_version = bytes;
  bad_version[4] = 0x7f;
  CHECK_THROWS_AS(deserialize(bad_version), FormatError);

  CHECK_THROWS_AS(from_json("{ not json"), FormatError);
  CHECK_THROWS_AS(from_json("{}"), FormatError);
}

TEST_CASE("serialize rejects a mismatched spec") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(4, 2, 1.0, 104));
  const auto other = FeatureMapSpec::rff_complex(shared_dense(4, 2, 1.0, 105));
  const Sketch s = sketch_dataset(random_rows(3, 2, 64), spec);
  CHECK_THROWS_AS(serialize(s, other), IncompatibleSketchError);
}

TEST_CASE("json mirror round trip") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(8, 2, 0.6, 106));
  const Sketch s = sketch_dataset(random_rows(17, 2, 65), spec);
  const LoadedSketch loaded = from_json(to_json(s, spec));
  CHECK(loaded.sketch.values == s.values);
  CHECK(loaded.sketch.n == s.n);
  CHECK(loaded.spec.fingerprint() == spec.fingerprint());
}

TEST_CASE("cross-process replay: file merged elsewhere equals local merge") {
  // round-trip both halves through bytes, rebuild the spec from the file
  // header only, then merge with the regenerated spec
  const auto spec =
      FeatureMapSpec::rff_quantized(shared_dense(8, 2, 0.9, 107), 55);
  const Eigen::MatrixXd rows = random_rows(100, 2, 66);
  const Sketch left = sketch_dataset(rows.topRows(40), spec);
  const Sketch right = sketch_dataset(rows.bottomRows(60), spec);

  const LoadedSketch l2 = deserialize(serialize(left, spec));
  const LoadedSketch r2 = deserialize(serialize(right, spec));
  const Sketch remote = merge(l2.sketch, r2.sketch);
  const Sketch local = merge(left, right);
  CHECK(remote.values == local.values);
  CHECK(remote.n == local.n);
}

TEST_CASE("block-parallel sketching equals the sequential pass") {
  const auto spec = FeatureMapSpec::rff_complex(shared_dense(16, 3, 0.5, 108));
  const Eigen::MatrixXd rows = random_rows(1003, 3, 67);
  const Sketch seq = sketch_dataset(rows, spec);
  Sketch acc = sketch_dataset(rows.topRows(0), spec);
  Eigen::Index done = 0;
  while (done < rows.rows()) {
    const Eigen::Index take = std::min<Eigen::Index>(97, rows.rows() - done);
    acc = merge(acc, sketch_dataset(rows.middleRows(done, take), spec));
    done += take;
  }
  CHECK(acc.n == seq.n);
  CHECK((acc.values - seq.values).norm() <= 1e-10 * seq.values.norm());
}

TEST_CASE("sketch-based MMD matches the closed form at m = 1e4") {
  const std::size_t m = 10000, d = 2;
  const double sigma_w = 0.4;
  const auto spec =
      FeatureMapSpec::rff_complex(shared_dense(m, d, sigma_w, 109));

  GmmModel p, q;
  p.weights = Eigen::VectorXd::Ones(1);
  p.means = Eigen::MatrixXd::Zero(1, d);
  p.variances = Eigen::MatrixXd::Constant(1, d, 0.3);
  q = p;
  q.means(0, 0) = 1.2;
  q.variances(0, 1) = 0.5;

  const Eigen::VectorXcd ap =
      gaussian_atom(spec, p.means.row(0), p.variances.row(0));
  const Eigen::VectorXcd aq =
      gaussian_atom(spec, q.means.row(0), q.variances.row(0));
  const double sketch_mmd = (ap - aq).norm() / std::sqrt(double(m));
  const double sigma = 1.0 / (kTwoPi * sigma_w);
  const double closed = mmd_gaussian_closed_form(p, q, sigma);
  CHECK(std::fabs(sketch_mmd - closed) <= 5e-2);
}
