#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cskl/feature_map.hpp"

namespace cskl {

enum class DpMechanism : std::uint8_t { none = 0, laplace = 1, gaussian = 2 };

struct PrivacyRecord {
  DpMechanism mechanism = DpMechanism::none;
  double epsilon = 0.0;
  double delta = 0.0;
};

// Running mean of feature vectors over a dataset, plus the sample count
// and the fingerprint of the map that produced it. Once a privacy record
// is attached the sketch is sealed: no update, delete, or merge.
struct Sketch {
  Eigen::VectorXcd values;
  std::uint64_t n = 0;
  std::uint64_t fingerprint = 0;
  std::optional<PrivacyRecord> privacy;

  bool sealed() const { return privacy.has_value(); }
};

// Single-writer streaming accumulator. Keeps a compensated (Kahan) running
// mean so the stored values stay bounded for arbitrarily large n.
// Parallelism is achieved by merging independent builders.
class SketchBuilder {
 public:
  explicit SketchBuilder(const FeatureMapSpec& spec);

  void add(const Eigen::Ref<const Eigen::VectorXd>& x);
  Sketch finish() const;
  std::uint64_t count() const { return n_; }

 private:
  FeatureMapSpec spec_;
  Eigen::VectorXcd mean_;
  Eigen::VectorXcd comp_;  // Kahan compensation for the mean updates
  std::uint64_t n_ = 0;
};

// Streams rows through the map in a single O(m)-memory pass.
Sketch sketch_dataset(const Eigen::Ref<const Eigen::MatrixXd>& rows,
                      const FeatureMapSpec& spec);
Sketch sketch_dataset(
    const std::function<bool(Eigen::VectorXd&)>& next_row,
    const FeatureMapSpec& spec);

// Count-weighted mean of two privacy-free sketches with equal fingerprints.
Sketch merge(const Sketch& s1, const Sketch& s2);

// Exact single-sample insertion / removal on the running mean.
Sketch update(const Sketch& s, const Eigen::Ref<const Eigen::VectorXd>& x,
              const FeatureMapSpec& spec);
Sketch remove(const Sketch& s, const Eigen::Ref<const Eigen::VectorXd>& x,
              const FeatureMapSpec& spec);

// Binary sketch file, little-endian:
//   magic "CSKL", u16 version=1,
//   map header (map kind u8, m u32, d u32, d_pad u32, sigma_w f64,
//               operator kind u8, operator seed u64, dither seed u64),
//   n u64, privacy (mechanism u8, epsilon f64, delta f64),
//   2m f64 values (re, im interleaved; im zero for real maps).
void serialize(const Sketch& s, const FeatureMapSpec& spec, std::ostream& out);
std::vector<std::uint8_t> serialize(const Sketch& s,
                                    const FeatureMapSpec& spec);

struct LoadedSketch {
  Sketch sketch;
  FeatureMapSpec spec;  // rebuilt from the header; fingerprint recomputed
};

LoadedSketch deserialize(std::istream& in);
LoadedSketch deserialize(const std::vector<std::uint8_t>& bytes);

// JSON mirror with base64 payload, for debugging.
std::string to_json(const Sketch& s, const FeatureMapSpec& spec);
LoadedSketch from_json(const std::string& text);

}  // namespace cskl
