// cskl: compressive-learning pipelines from the command line.
//
// Subcommands: gen, sketch, merge, learn, privatize, eval, kernelscan.
// Exit codes: 0 ok, 2 usage, 3 format, 4 incompatibility, 5 sealed sketch,
// 6 numerical failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cskl/baselines.hpp"
#include "cskl/errors.hpp"
#include "cskl/feature_map.hpp"
#include "cskl/privacy.hpp"
#include "cskl/rng.hpp"
#include "cskl/sketch.hpp"
#include "cskl/solvers.hpp"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;
constexpr int kExitIncompatible = 4;
constexpr int kExitSealed = 5;
constexpr int kExitNumerical = 6;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- CSV I/O

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Streams data rows of a headered CSV through `consume`, one vector at a
// time. Returns the column count (0 when the file has no data rows).
std::size_t stream_csv(const std::string& path,
                       const std::function<void(const Eigen::VectorXd&,
                                                std::uint64_t)>& consume) {
  std::ifstream in(path);
  if (!in) throw cskl::FormatError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw cskl::FormatError(path + ": missing header row");
  const std::size_t d = split_csv_line(line).size();
  if (d == 0) throw cskl::FormatError(path + ": empty header row");

  Eigen::VectorXd x(static_cast<Eigen::Index>(d));
  std::uint64_t row = 0;
  std::uint64_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != d)
      throw cskl::FormatError(path + ":" + std::to_string(lineno) +
                              ": expected " + std::to_string(d) +
                              " fields, got " + std::to_string(fields.size()));
    for (std::size_t t = 0; t < d; ++t) {
      try {
        std::size_t used = 0;
        x[static_cast<Eigen::Index>(t)] = std::stod(fields[t], &used);
        if (used != fields[t].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw cskl::FormatError(path + ":" + std::to_string(lineno) +
                                ": bad number '" + fields[t] + "'");
      }
    }
    consume(x, row);
    ++row;
  }
  return d;
}

Eigen::MatrixXd load_csv(const std::string& path) {
  std::vector<Eigen::VectorXd> rows;
  stream_csv(path, [&](const Eigen::VectorXd& x, std::uint64_t) {
    rows.push_back(x);
  });
  if (rows.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return out;
}

// ------------------------------------------------------------- sketch I/O

cskl::LoadedSketch load_sketch(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cskl::FormatError("cannot open " + path);
  return cskl::deserialize(in);
}

void save_sketch(const cskl::Sketch& s, const cskl::FeatureMapSpec& spec,
                 const std::string& path, bool require_dp) {
  if (require_dp && !s.sealed())
    throw UsageError("--require-dp set but the output sketch is not private");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw cskl::FormatError("cannot write " + path);
  cskl::serialize(s, spec, out);
}

// The binary format has no room for the search box or provenance, so each
// sketch gets a JSON sidecar at <path>.meta.json.
std::string meta_path(const std::string& sketch_path) {
  return sketch_path + ".meta.json";
}

void save_meta(const std::string& sketch_path, const json& meta) {
  std::ofstream out(meta_path(sketch_path));
  if (!out) throw cskl::FormatError("cannot write " + meta_path(sketch_path));
  out << meta.dump(2) << "\n";
}

std::optional<json> load_meta(const std::string& sketch_path) {
  std::ifstream in(meta_path(sketch_path));
  if (!in) return std::nullopt;
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw cskl::FormatError(meta_path(sketch_path) + ": " + e.what());
  }
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}
Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

// ----------------------------------------------------------- map building

struct MapConfig {
  std::string map_kind = "rff";
  std::string op_kind = "dense";
  std::size_t m = 0;
  std::size_t k = 0;  // only used for the m = 10 k d default
  std::string sigma_w = "auto";
  std::uint64_t seed = 0;
  std::uint64_t dither_seed = 0;
};

cskl::FeatureMapSpec build_spec(const MapConfig& cfg, std::size_t d,
                                double resolved_sigma_w) {
  if (cfg.map_kind == "outer_product") {
    return cskl::FeatureMapSpec::outer_product(d);
  }
  std::shared_ptr<const cskl::FrequencyOperator> op;
  if (cfg.op_kind == "dense")
    op = std::make_shared<cskl::FrequencyOperator>(
        cskl::FrequencyOperator::build_dense(cfg.m, d, resolved_sigma_w,
                                             cfg.seed));
  else if (cfg.op_kind == "structured")
    op = std::make_shared<cskl::FrequencyOperator>(
        cskl::FrequencyOperator::build_structured(cfg.m, d, resolved_sigma_w,
                                                  cfg.seed));
  else
    throw UsageError("unknown operator kind '" + cfg.op_kind + "'");

  if (cfg.map_kind == "rff")
    return cskl::FeatureMapSpec::rff_complex(std::move(op));
  if (cfg.map_kind == "rff_quantized")
    return cskl::FeatureMapSpec::rff_quantized(std::move(op), cfg.dither_seed);
  if (cfg.map_kind == "quadratic")
    return cskl::FeatureMapSpec::quadratic(std::move(op));
  throw UsageError("unknown map kind '" + cfg.map_kind + "'");
}

// --------------------------------------------------------------- commands

int cmd_gen(const std::string& out, std::size_t k, std::size_t d,
            std::size_t n, double sep, double sigma, std::uint64_t seed) {
  cskl::SyntheticSpec spec;
  spec.k = k;
  spec.d = d;
  spec.n = n;
  spec.separation = sep;
  spec.sigma = sigma;
  spec.seed = seed;
  const cskl::SyntheticData data = synth_gmm(spec);

  std::ofstream csv(out);
  if (!csv) throw cskl::FormatError("cannot write " + out);
  csv.precision(17);
  for (std::size_t t = 0; t < d; ++t) csv << (t ? ",x" : "x") << t;
  csv << "\n";
  for (Eigen::Index i = 0; i < data.rows.rows(); ++i) {
    for (Eigen::Index t = 0; t < data.rows.cols(); ++t)
      csv << (t ? "," : "") << data.rows(i, t);
    csv << "\n";
  }

  json truth;
  truth["k"] = k;
  truth["d"] = d;
  truth["n"] = n;
  truth["seed"] = seed;
  truth["sigma"] = sigma;
  truth["separation"] = sep;
  truth["weights"] = to_std(data.truth.weights);
  for (Eigen::Index c = 0; c < data.truth.means.rows(); ++c)
    truth["means"].push_back(to_std(data.truth.means.row(c).transpose()));
  std::ofstream tj(out + ".truth.json");
  tj << truth.dump(2) << "\n";
  std::cout << "wrote " << n << " rows to " << out << "\n";
  return 0;
}

int cmd_sketch(const std::string& input, const std::string& out,
               MapConfig cfg, bool require_dp) {
  // pass 1: reservoir subsample for the box and the sigma_w heuristic
  const std::size_t reservoir_cap = 1000;
  std::vector<Eigen::VectorXd> reservoir;
  cskl::Rng res_rng(cskl::Rng::derive(cfg.seed, 0x7265736bULL));
  std::size_t d = stream_csv(input, [&](const Eigen::VectorXd& x,
                                        std::uint64_t row) {
    if (reservoir.size() < reservoir_cap) {
      reservoir.push_back(x);
    } else {
      const auto j = static_cast<std::uint64_t>(res_rng.uniform() *
                                                static_cast<double>(row + 1));
      if (j < reservoir_cap) reservoir[static_cast<std::size_t>(j)] = x;
    }
  });
  if (reservoir.empty()) {
    std::cerr << "warning: " << input << " has no data rows; writing an "
              << "empty sketch\n";
    if (d == 0) d = 1;
  }

  double resolved_sigma_w = 1.0;
  if (cfg.map_kind == "rff" || cfg.map_kind == "rff_quantized" ||
      cfg.map_kind == "quadratic") {
    if (cfg.sigma_w == "auto") {
      if (reservoir.size() < 2)
        throw UsageError(
            "--sigma-w auto needs at least two data rows; pass a value");
      std::vector<double> dists;
      dists.reserve(reservoir.size() * (reservoir.size() - 1) / 2);
      for (std::size_t i = 0; i < reservoir.size(); ++i)
        for (std::size_t j = i + 1; j < reservoir.size(); ++j)
          dists.push_back((reservoir[i] - reservoir[j]).norm());
      std::nth_element(dists.begin(), dists.begin() + dists.size() / 2,
                       dists.end());
      const double median = dists[dists.size() / 2];
      if (!(median > 0.0))
        throw cskl::NumericalError(
            "sigma-w auto: median pairwise distance is zero");
      resolved_sigma_w = 1.0 / (cskl::kTwoPi * median);
    } else {
      try {
        resolved_sigma_w = std::stod(cfg.sigma_w);
      } catch (const std::exception&) {
        throw UsageError("--sigma-w must be a number or 'auto'");
      }
      if (!(resolved_sigma_w > 0.0))
        throw UsageError("--sigma-w must be positive");
    }
  }

  if (cfg.m == 0 && cfg.map_kind != "outer_product") {
    if (cfg.k == 0)
      throw UsageError("pass --m, or --k to use the default m = 10 k d");
    cfg.m = 10 * cfg.k * d;
  }

  const cskl::FeatureMapSpec spec = build_spec(cfg, d, resolved_sigma_w);

  // pass 2: streaming accumulation, O(m) memory
  cskl::SketchBuilder builder(spec);
  stream_csv(input, [&](const Eigen::VectorXd& x, std::uint64_t) {
    builder.add(x);
  });
  const cskl::Sketch s = builder.finish();
  save_sketch(s, spec, out, require_dp);

  json meta;
  meta["command"] = "sketch";
  meta["input"] = input;
  meta["n"] = s.n;
  meta["map"] = {{"kind", cfg.map_kind},
                 {"operator", cfg.op_kind},
                 {"m", spec.feature_dim()},
                 {"d", d},
                 {"sigma_w", resolved_sigma_w},
                 {"sigma_w_flag", cfg.sigma_w},
                 {"seed", cfg.seed},
                 {"dither_seed", cfg.dither_seed}};
  if (!reservoir.empty()) {
    Eigen::VectorXd lo = reservoir[0], hi = reservoir[0];
    for (const auto& x : reservoir) {
      lo = lo.cwiseMin(x);
      hi = hi.cwiseMax(x);
    }
    meta["box_lower"] = to_std(lo);
    meta["box_upper"] = to_std(hi);
    meta["box_source"] =
        "per-coordinate min/max of a " + std::to_string(reservoir.size()) +
        "-row reservoir subsample";
  }
  save_meta(out, meta);
  std::cout << "sketched " << s.n << " rows into " << out << " (m="
            << spec.feature_dim() << ", sigma_w=" << resolved_sigma_w << ")\n";
  return 0;
}

int cmd_merge(const std::vector<std::string>& inputs, const std::string& out,
              bool require_dp) {
  if (inputs.size() < 2) throw UsageError("merge needs at least two inputs");
  cskl::LoadedSketch acc = load_sketch(inputs[0]);
  std::optional<json> meta = load_meta(inputs[0]);
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    const cskl::LoadedSketch next = load_sketch(inputs[i]);
    acc.sketch = cskl::merge(acc.sketch, next.sketch);
    // combine boxes when both sides carry one
    const std::optional<json> next_meta = load_meta(inputs[i]);
    if (meta && next_meta && meta->contains("box_lower") &&
        next_meta->contains("box_lower")) {
      const Eigen::VectorXd lo =
          from_std((*meta)["box_lower"].get<std::vector<double>>())
              .cwiseMin(
                  from_std((*next_meta)["box_lower"].get<std::vector<double>>()));
      const Eigen::VectorXd hi =
          from_std((*meta)["box_upper"].get<std::vector<double>>())
              .cwiseMax(
                  from_std((*next_meta)["box_upper"].get<std::vector<double>>()));
      (*meta)["box_lower"] = to_std(lo);
      (*meta)["box_upper"] = to_std(hi);
    } else {
      if (meta) {
        meta->erase("box_lower");
        meta->erase("box_upper");
      }
    }
  }
  save_sketch(acc.sketch, acc.spec, out, require_dp);
  if (meta) {
    (*meta)["command"] = "merge";
    (*meta)["inputs"] = inputs;
    (*meta)["n"] = acc.sketch.n;
    save_meta(out, *meta);
  }
  std::cout << "merged " << inputs.size() << " sketches (n=" << acc.sketch.n
            << ") into " << out << "\n";
  return 0;
}

json model_to_json(const std::string& task, const cskl::CentroidModel& model,
                   double objective, std::uint64_t seed,
                   std::uint64_t fingerprint) {
  json j;
  j["task"] = task;
  j["k"] = model.k();
  j["d"] = model.d();
  j["weights"] = to_std(model.weights);
  for (Eigen::Index c = 0; c < model.centroids.rows(); ++c)
    j["centroids"].push_back(to_std(model.centroids.row(c).transpose()));
  j["objective"] = objective;
  j["seed"] = seed;
  j["map_fingerprint"] = fingerprint;
  return j;
}

int cmd_learn(const std::string& sketch_path, const std::string& out,
              const std::string& task, std::size_t k, std::size_t d1,
              const std::vector<double>& box_lower,
              const std::vector<double>& box_upper, std::uint64_t seed,
              int restarts) {
  cskl::LoadedSketch loaded = load_sketch(sketch_path);
  cskl::FeatureMapSpec spec = loaded.spec;
  cskl::Sketch sketch = loaded.sketch;

  // quantized sketches are converted to effective complex sketches first
  if (spec.kind() == cskl::MapKind::rff_quantized &&
      (task == "kmeans" || task == "gmm")) {
    const cskl::FeatureMapSpec cspec =
        cskl::FeatureMapSpec::rff_complex(spec.op_ptr());
    sketch = cskl::dequantize(sketch, spec, cspec);
    spec = cspec;
  }

  cskl::SolverOptions opts;
  opts.seed = seed;
  opts.restarts = restarts;
  const std::size_t d = spec.input_dim();
  if (task == "kmeans" || task == "gmm") {
    if (!box_lower.empty() || !box_upper.empty()) {
      if (box_lower.size() != d || box_upper.size() != d)
        throw UsageError("--box-lower/--box-upper need " + std::to_string(d) +
                         " comma-separated values");
      opts.box_lower = from_std(box_lower);
      opts.box_upper = from_std(box_upper);
    } else {
      const std::optional<json> meta = load_meta(sketch_path);
      if (!meta || !meta->contains("box_lower"))
        throw UsageError(
            "no search box: pass --box-lower/--box-upper (no sidecar "
            "metadata found for " +
            sketch_path + ")");
      opts.box_lower = from_std((*meta)["box_lower"].get<std::vector<double>>());
      opts.box_upper = from_std((*meta)["box_upper"].get<std::vector<double>>());
      // widen degenerate coordinates so the box has volume
      for (Eigen::Index t = 0; t < opts.box_lower.size(); ++t)
        if (!(opts.box_upper[t] > opts.box_lower[t])) {
          opts.box_lower[t] -= 0.5;
          opts.box_upper[t] += 0.5;
        }
    }
  }

  json out_json;
  if (task == "kmeans") {
    if (k == 0) throw UsageError("learn --task kmeans needs --k");
    const cskl::CentroidModel model = clomp_kmeans(sketch, k, spec, opts);
    out_json = model_to_json("kmeans", model,
                             sketch_cost(model, sketch, spec), seed,
                             spec.fingerprint());
  } else if (task == "gmm") {
    if (k == 0) throw UsageError("learn --task gmm needs --k");
    const cskl::GmmModel model = clomp_gmm(sketch, k, spec, opts);
    out_json["task"] = "gmm";
    out_json["k"] = model.k();
    out_json["d"] = model.d();
    out_json["weights"] = to_std(model.weights);
    for (Eigen::Index c = 0; c < model.means.rows(); ++c) {
      out_json["means"].push_back(to_std(model.means.row(c).transpose()));
      out_json["variances"].push_back(
          to_std(model.variances.row(c).transpose()));
    }
    out_json["objective"] = sketch_cost(model, sketch, spec);
    out_json["seed"] = seed;
    out_json["map_fingerprint"] = spec.fingerprint();
  } else if (task == "pca") {
    if (k == 0) throw UsageError("learn --task pca needs --k");
    const cskl::LowRankPsd model = fit_lowrank_psd(sketch, k, spec, opts);
    out_json["task"] = "pca";
    out_json["k"] = k;
    out_json["d"] = spec.input_dim();
    for (Eigen::Index c = 0; c < model.factor.rows(); ++c)
      out_json["factor"].push_back(to_std(model.factor.row(c).transpose()));
    const Eigen::MatrixXd basis = model.basis();
    for (Eigen::Index c = 0; c < basis.rows(); ++c)
      out_json["basis"].push_back(to_std(basis.row(c).transpose()));
    out_json["objective"] = sketch_cost(model, sketch, spec);
    out_json["seed"] = seed;
    out_json["map_fingerprint"] = spec.fingerprint();
  } else if (task == "regress") {
    if (d1 == 0) throw UsageError("learn --task regress needs --d1");
    if (d1 >= spec.input_dim())
      throw UsageError("--d1 must be smaller than the data dimension");
    const Eigen::MatrixXd theta =
        ls_regression(sketch, d1, spec.input_dim() - d1, spec, opts);
    out_json["task"] = "regress";
    out_json["d1"] = d1;
    out_json["d2"] = spec.input_dim() - d1;
    for (Eigen::Index r = 0; r < theta.rows(); ++r)
      out_json["theta"].push_back(to_std(theta.row(r).transpose()));
    out_json["seed"] = seed;
    out_json["map_fingerprint"] = spec.fingerprint();
  } else {
    throw UsageError("unknown task '" + task + "'");
  }

  std::ofstream f(out);
  if (!f) throw cskl::FormatError("cannot write " + out);
  f << out_json.dump(2) << "\n";
  std::cout << "wrote model to " << out << "\n";
  return 0;
}

int cmd_privatize(const std::string& sketch_path, const std::string& out,
                  const std::string& mechanism, double epsilon, double delta,
                  std::uint64_t seed) {
  const cskl::LoadedSketch loaded = load_sketch(sketch_path);
  cskl::Sketch noisy;
  if (mechanism == "laplace")
    noisy = privatize_laplace(loaded.sketch, loaded.spec, epsilon, seed);
  else if (mechanism == "gaussian")
    noisy = privatize_gaussian(loaded.sketch, loaded.spec, epsilon, delta, seed);
  else
    throw UsageError("unknown mechanism '" + mechanism + "'");
  save_sketch(noisy, loaded.spec, out, false);
  if (std::optional<json> meta = load_meta(sketch_path)) {
    (*meta)["command"] = "privatize";
    (*meta)["mechanism"] = mechanism;
    (*meta)["epsilon"] = epsilon;
    if (mechanism == "gaussian") (*meta)["delta"] = delta;
    save_meta(out, *meta);
  }
  std::cout << "wrote " << mechanism << "-private sketch to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& out, bool baseline, std::uint64_t seed) {
  std::ifstream mf(model_path);
  if (!mf) throw cskl::FormatError("cannot open " + model_path);
  json mj;
  try {
    mf >> mj;
  } catch (const json::exception& e) {
    throw cskl::FormatError(model_path + ": " + e.what());
  }
  const Eigen::MatrixXd data = load_csv(data_path);
  if (data.rows() == 0) throw cskl::FormatError(data_path + ": no data rows");

  auto rows_to_matrix = [](const json& arr) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(arr.size()),
                      static_cast<Eigen::Index>(arr[0].size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      m.row(r) = from_std(arr[static_cast<std::size_t>(r)]
                              .get<std::vector<double>>())
                     .transpose();
    return m;
  };

  const std::string task = mj.at("task").get<std::string>();
  json metrics;
  metrics["task"] = task;
  metrics["n"] = data.rows();
  if (task == "kmeans") {
    cskl::CentroidModel model;
    model.centroids = rows_to_matrix(mj.at("centroids"));
    model.weights = from_std(mj.at("weights").get<std::vector<double>>());
    if (model.centroids.cols() != data.cols())
      throw cskl::IncompatibleSketchError(
          "model dimension does not match the data");
    metrics["risk"] = empirical_risk(cskl::Task::kmeans, model, data);
    metrics["sse"] = cskl::kmeans_sse(data, model.centroids);
    if (baseline) {
      const cskl::CentroidModel lloyd =
          cskl::lloyd_kmeans(data, static_cast<std::size_t>(model.k()), seed);
      const double lloyd_sse = cskl::kmeans_sse(data, lloyd.centroids);
      metrics["lloyd_sse"] = lloyd_sse;
      metrics["sse_ratio"] = metrics["sse"].get<double>() / lloyd_sse;
    }
  } else if (task == "gmm") {
    cskl::GmmModel model;
    model.means = rows_to_matrix(mj.at("means"));
    model.variances = rows_to_matrix(mj.at("variances"));
    model.weights = from_std(mj.at("weights").get<std::vector<double>>());
    if (model.means.cols() != data.cols())
      throw cskl::IncompatibleSketchError(
          "model dimension does not match the data");
    metrics["risk"] = empirical_risk(cskl::Task::gmm, model, data);
  } else if (task == "pca") {
    const Eigen::MatrixXd basis = rows_to_matrix(mj.at("basis"));
    if (basis.rows() != data.cols())
      throw cskl::IncompatibleSketchError(
          "model dimension does not match the data");
    metrics["risk"] = empirical_risk(cskl::Task::pca, basis, data);
  } else if (task == "regress") {
    const Eigen::MatrixXd theta = rows_to_matrix(mj.at("theta"));
    const auto d1 = mj.at("d1").get<std::size_t>();
    metrics["risk"] = empirical_risk(cskl::Task::regress, theta, data, d1);
  } else {
    throw cskl::FormatError("model file has unknown task '" + task + "'");
  }

  const std::string text = metrics.dump(2);
  if (out.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream f(out);
    if (!f) throw cskl::FormatError("cannot write " + out);
    f << text << "\n";
    std::cout << "wrote metrics to " << out << "\n";
  }
  return 0;
}

int cmd_kernelscan(const std::string& sketch_path, const std::string& out,
                   const std::string& data_path, double grid_min,
                   double grid_max, std::size_t grid_n) {
  const cskl::LoadedSketch loaded = load_sketch(sketch_path);
  const cskl::FeatureMapSpec& spec = loaded.spec;
  if (spec.kind() != cskl::MapKind::rff_complex)
    throw cskl::IncompatibleSketchError("kernelscan needs an rff sketch");
  if (spec.input_dim() != 2)
    throw UsageError("kernelscan supports d = 2 sketches");
  if (grid_n < 2) throw UsageError("--grid-n must be at least 2");

  Eigen::MatrixXd data;
  if (!data_path.empty()) data = load_csv(data_path);
  const double sigma = cskl::kernel_width_from_sigma_w(spec.op().sigma_w());
  const double m = static_cast<double>(spec.feature_dim());

  std::ofstream f(out);
  if (!f) throw cskl::FormatError("cannot write " + out);
  f.precision(17);
  f << "c0,c1,criterion" << (data.rows() ? ",parzen" : "") << "\n";
  Eigen::VectorXd c(2);
  const double step = (grid_max - grid_min) / static_cast<double>(grid_n - 1);
  for (std::size_t i = 0; i < grid_n; ++i) {
    c[0] = grid_min + static_cast<double>(i) * step;
    for (std::size_t j = 0; j < grid_n; ++j) {
      c[1] = grid_min + static_cast<double>(j) * step;
      const double criterion =
          cskl::rff(spec, c).dot(loaded.sketch.values).real() / m;
      f << c[0] << "," << c[1] << "," << criterion;
      if (data.rows()) f << "," << cskl::parzen_score(data, c, sigma);
      f << "\n";
    }
  }
  std::cout << "wrote " << grid_n * grid_n << " grid points to " << out
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compressive learning from mergeable sketches"};
  app.require_subcommand(1);

  bool require_dp = false;
  app.add_flag("--require-dp", require_dp,
               "refuse to write sketches without a privacy record");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic GMM dataset");
  std::size_t gen_k = 3, gen_d = 2, gen_n = 10000;
  double gen_sep = 6.0, gen_sigma = 1.0;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--k", gen_k, "number of components");
  gen->add_option("--d", gen_d, "dimension");
  gen->add_option("--n", gen_n, "number of samples");
  gen->add_option("--sep", gen_sep, "separation in units of sigma");
  gen->add_option("--sigma", gen_sigma, "component scale");
  gen->add_option("--seed", gen_seed, "generator seed")->envname("CSKL_SEED");
  gen->add_option("--out", gen_out, "output CSV path")->required();

  // sketch
  auto* sk = app.add_subcommand("sketch", "sketch a CSV dataset");
  std::string sk_in, sk_out;
  MapConfig sk_cfg;
  sk->add_option("input", sk_in, "input CSV")->required();
  sk->add_option("--out", sk_out, "output sketch path")->required();
  sk->add_option("--map", sk_cfg.map_kind,
                 "feature map: rff|rff_quantized|quadratic|outer_product");
  sk->add_option("--op", sk_cfg.op_kind, "operator: dense|structured");
  sk->add_option("--m", sk_cfg.m, "sketch dimension (default 10 k d)");
  sk->add_option("--k", sk_cfg.k, "target component count for the m default");
  sk->add_option("--sigma-w", sk_cfg.sigma_w,
                 "frequency scale, number or 'auto'");
  sk->add_option("--seed", sk_cfg.seed, "operator seed")->envname("CSKL_SEED");
  sk->add_option("--dither-seed", sk_cfg.dither_seed,
                 "dither seed (rff_quantized)");

  // merge
  auto* mg = app.add_subcommand("merge", "merge sketches of disjoint data");
  std::vector<std::string> mg_in;
  std::string mg_out;
  mg->add_option("inputs", mg_in, "input sketches")->required()->expected(-2);
  mg->add_option("--out", mg_out, "output sketch path")->required();

  // learn
  auto* ln = app.add_subcommand("learn", "recover parameters from a sketch");
  std::string ln_sketch, ln_out, ln_task = "kmeans";
  std::size_t ln_k = 0, ln_d1 = 0;
  std::vector<double> ln_lo, ln_hi;
  std::uint64_t ln_seed = 0;
  int ln_restarts = 10;
  ln->add_option("sketch", ln_sketch, "input sketch")->required();
  ln->add_option("--out", ln_out, "output model JSON")->required();
  ln->add_option("--task", ln_task, "kmeans|gmm|pca|regress");
  ln->add_option("--k", ln_k, "components / rank");
  ln->add_option("--d1", ln_d1, "response dimension (regress)");
  ln->add_option("--box-lower", ln_lo, "search box lower corner")
      ->delimiter(',');
  ln->add_option("--box-upper", ln_hi, "search box upper corner")
      ->delimiter(',');
  ln->add_option("--seed", ln_seed, "solver seed")->envname("CSKL_SEED");
  ln->add_option("--restarts", ln_restarts, "candidate-search restarts");

  // privatize
  auto* pv = app.add_subcommand("privatize", "add differential-privacy noise");
  std::string pv_sketch, pv_out, pv_mech = "laplace";
  double pv_eps = 1.0, pv_delta = 1e-6;
  std::uint64_t pv_seed = 0;
  pv->add_option("sketch", pv_sketch, "input sketch")->required();
  pv->add_option("--out", pv_out, "output sketch path")->required();
  pv->add_option("--mechanism", pv_mech, "laplace|gaussian");
  pv->add_option("--epsilon", pv_eps, "privacy budget")->required();
  pv->add_option("--delta", pv_delta, "failure probability (gaussian)");
  pv->add_option("--seed", pv_seed, "noise seed")->envname("CSKL_SEED");

  // eval
  auto* ev = app.add_subcommand("eval", "empirical risk of a model on data");
  std::string ev_model, ev_data, ev_out;
  bool ev_baseline = false;
  std::uint64_t ev_seed = 0;
  ev->add_option("--model", ev_model, "model JSON")->required();
  ev->add_option("--data", ev_data, "data CSV")->required();
  ev->add_option("--out", ev_out, "metrics JSON path (default stdout)");
  ev->add_flag("--baseline", ev_baseline,
               "also run Lloyd and report the SSE ratio (kmeans)");
  ev->add_option("--seed", ev_seed, "baseline seed")->envname("CSKL_SEED");

  // kernelscan
  auto* ks = app.add_subcommand(
      "kernelscan", "grid scan of the sketch criterion and Parzen score");
  std::string ks_sketch, ks_out, ks_data;
  double ks_min = -3.0, ks_max = 3.0;
  std::size_t ks_n = 50;
  ks->add_option("sketch", ks_sketch, "input sketch (rff, d = 2)")->required();
  ks->add_option("--out", ks_out, "output CSV")->required();
  ks->add_option("--data", ks_data, "data CSV for the Parzen column");
  ks->add_option("--grid-min", ks_min, "grid lower corner (both axes)");
  ks->add_option("--grid-max", ks_max, "grid upper corner (both axes)");
  ks->add_option("--grid-n", ks_n, "grid points per axis");

  // key=value config file with one [subcommand] section per command;
  // explicit flags take precedence
  app.set_config("--config");
  for (CLI::App* sub : {gen, sk, mg, ln, pv, ev, ks}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed())
      return cmd_gen(gen_out, gen_k, gen_d, gen_n, gen_sep, gen_sigma,
                     gen_seed);
    if (sk->parsed()) return cmd_sketch(sk_in, sk_out, sk_cfg, require_dp);
    if (mg->parsed()) return cmd_merge(mg_in, mg_out, require_dp);
    if (ln->parsed())
      return cmd_learn(ln_sketch, ln_out, ln_task, ln_k, ln_d1, ln_lo, ln_hi,
                       ln_seed, ln_restarts);
    if (pv->parsed())
      return cmd_privatize(pv_sketch, pv_out, pv_mech, pv_eps, pv_delta,
                           pv_seed);
    if (ev->parsed())
      return cmd_eval(ev_model, ev_data, ev_out, ev_baseline, ev_seed);
    if (ks->parsed())
      return cmd_kernelscan(ks_sketch, ks_out, ks_data, ks_min, ks_max, ks_n);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cskl::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const cskl::SealedSketchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSealed;
  } catch (const cskl::IncompatibleSketchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIncompatible;
  } catch (const cskl::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
