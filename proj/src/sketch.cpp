#include "cskl/sketch.hpp"

#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "cskl/errors.hpp"

namespace cskl {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'K', 'L'};
constexpr std::uint16_t kVersion = 1;

void check_compatible(const Sketch& s1, const Sketch& s2) {
  if (s1.fingerprint != s2.fingerprint)
    throw IncompatibleSketchError("sketch fingerprints differ");
}

void check_unsealed(const Sketch& s, const char* op) {
  if (s.sealed())
    throw SealedSketchError(std::string(op) +
                            ": sketch is privatized and sealed");
}

// Kahan-compensated add of delta into acc.
inline void compensated_add(double& acc, double& comp, double delta) {
  const double y = delta - comp;
  const double t = acc + y;
  comp = (t - acc) - y;
  acc = t;
}

}  // namespace

SketchBuilder::SketchBuilder(const FeatureMapSpec& spec) : spec_(spec) {
  const auto m = static_cast<Eigen::Index>(spec.feature_dim());
  mean_ = Eigen::VectorXcd::Zero(m);
  comp_ = Eigen::VectorXcd::Zero(m);
}

void SketchBuilder::add(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (n_ == std::numeric_limits<std::uint64_t>::max())
    throw std::overflow_error("sketch builder: sample count overflow");
  const Eigen::VectorXcd phi = spec_.evaluate(x);
  ++n_;
  const double inv_n = 1.0 / static_cast<double>(n_);
  for (Eigen::Index j = 0; j < mean_.size(); ++j) {
    double re = mean_[j].real(), im = mean_[j].imag();
    double cre = comp_[j].real(), cim = comp_[j].imag();
    compensated_add(re, cre, (phi[j].real() - re) * inv_n);
    compensated_add(im, cim, (phi[j].imag() - im) * inv_n);
    mean_[j] = {re, im};
    comp_[j] = {cre, cim};
  }
}

Sketch SketchBuilder::finish() const {
  Sketch s;
  s.values = mean_;
  s.n = n_;
  s.fingerprint = spec_.fingerprint();
  return s;
}

Sketch sketch_dataset(const Eigen::Ref<const Eigen::MatrixXd>& rows,
                      const FeatureMapSpec& spec) {
  SketchBuilder builder(spec);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    if (static_cast<std::size_t>(rows.cols()) != spec.input_dim()) {
      std::ostringstream msg;
      msg << "sketch_dataset: row " << i << " has dimension " << rows.cols()
          << ", expected " << spec.input_dim();
      throw std::invalid_argument(msg.str());
    }
    builder.add(rows.row(i).transpose());
  }
  return builder.finish();
}

Sketch sketch_dataset(const std::function<bool(Eigen::VectorXd&)>& next_row,
                      const FeatureMapSpec& spec) {
  SketchBuilder builder(spec);
  Eigen::VectorXd x;
  std::uint64_t i = 0;
  while (next_row(x)) {
    if (static_cast<std::size_t>(x.size()) != spec.input_dim()) {
      std::ostringstream msg;
      msg << "sketch_dataset: row " << i << " has dimension " << x.size()
          << ", expected " << spec.input_dim();
      throw std::invalid_argument(msg.str());
    }
    builder.add(x);
    ++i;
  }
  return builder.finish();
}

Sketch merge(const Sketch& s1, const Sketch& s2) {
  check_compatible(s1, s2);
  check_unsealed(s1, "merge");
  check_unsealed(s2, "merge");
  Sketch out;
  out.fingerprint = s1.fingerprint;
  out.n = s1.n + s2.n;
  if (out.n == 0) {
    out.values = Eigen::VectorXcd::Zero(s1.values.size());
    return out;
  }
  const double n1 = static_cast<double>(s1.n);
  const double n2 = static_cast<double>(s2.n);
  out.values = (n1 * s1.values + n2 * s2.values) / (n1 + n2);
  return out;
}

Sketch update(const Sketch& s, const Eigen::Ref<const Eigen::VectorXd>& x,
              const FeatureMapSpec& spec) {
  check_unsealed(s, "update");
  if (spec.fingerprint() != s.fingerprint)
    throw IncompatibleSketchError("update: spec does not match sketch");
  Sketch out;
  out.fingerprint = s.fingerprint;
  out.n = s.n + 1;
  const double n = static_cast<double>(s.n);
  out.values = (n * s.values + spec.evaluate(x)) / (n + 1.0);
  return out;
}

Sketch remove(const Sketch& s, const Eigen::Ref<const Eigen::VectorXd>& x,
              const FeatureMapSpec& spec) {
  check_unsealed(s, "delete");
  if (spec.fingerprint() != s.fingerprint)
    throw IncompatibleSketchError("delete: spec does not match sketch");
  if (s.n == 0) throw std::invalid_argument("delete: sketch is empty");
  Sketch out;
  out.fingerprint = s.fingerprint;
  out.n = s.n - 1;
  if (out.n == 0) {
    out.values = Eigen::VectorXcd::Zero(s.values.size());
    return out;
  }
  const double n = static_cast<double>(s.n);
  out.values = (n * s.values - spec.evaluate(x)) / (n - 1.0);
  return out;
}

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw FormatError("sketch file truncated");
  return v;
}

struct MapHeader {
  std::uint8_t map_kind = 0;
  std::uint32_t m = 0, d = 0, d_pad = 0;
  double sigma_w = 0.0;
  std::uint8_t op_kind = 0;
  std::uint64_t op_seed = 0;
  std::uint64_t dither_seed = 0;
};

MapHeader header_from_spec(const FeatureMapSpec& spec) {
  MapHeader h;
  h.map_kind = static_cast<std::uint8_t>(spec.kind());
  h.m = static_cast<std::uint32_t>(spec.feature_dim());
  h.d = static_cast<std::uint32_t>(spec.input_dim());
  if (spec.has_operator()) {
    h.d_pad = static_cast<std::uint32_t>(spec.op().padded_dim());
    h.sigma_w = spec.op().sigma_w();
    h.op_kind = static_cast<std::uint8_t>(spec.op().kind());
    h.op_seed = spec.op().seed();
  } else {
    h.d_pad = h.d;
  }
  h.dither_seed = spec.dither_seed();
  return h;
}

FeatureMapSpec spec_from_header(const MapHeader& h) {
  const auto kind = static_cast<MapKind>(h.map_kind);
  if (kind == MapKind::outer_product) return FeatureMapSpec::outer_product(h.d);
  std::shared_ptr<const FrequencyOperator> op;
  if (static_cast<OperatorKind>(h.op_kind) == OperatorKind::dense)
    op = std::make_shared<FrequencyOperator>(
        FrequencyOperator::build_dense(h.m, h.d, h.sigma_w, h.op_seed));
  else
    op = std::make_shared<FrequencyOperator>(
        FrequencyOperator::build_structured(h.m, h.d, h.sigma_w, h.op_seed));
  switch (kind) {
    case MapKind::rff_complex:
      return FeatureMapSpec::rff_complex(std::move(op));
    case MapKind::rff_quantized:
      return FeatureMapSpec::rff_quantized(std::move(op), h.dither_seed);
    case MapKind::quadratic:
      return FeatureMapSpec::quadratic(std::move(op));
    default:
      throw FormatError("sketch file: unknown map kind");
  }
}

void write_header(std::ostream& out, const MapHeader& h) {
  put(out, h.map_kind);
  put(out, h.m);
  put(out, h.d);
  put(out, h.d_pad);
  put(out, h.sigma_w);
  put(out, h.op_kind);
  put(out, h.op_seed);
  put(out, h.dither_seed);
}

MapHeader read_header(std::istream& in) {
  MapHeader h;
  h.map_kind = get<std::uint8_t>(in);
  h.m = get<std::uint32_t>(in);
  h.d = get<std::uint32_t>(in);
  h.d_pad = get<std::uint32_t>(in);
  h.sigma_w = get<double>(in);
  h.op_kind = get<std::uint8_t>(in);
  h.op_seed = get<std::uint64_t>(in);
  h.dither_seed = get<std::uint64_t>(in);
  return h;
}

const char kB64[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::uint8_t* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    std::uint32_t v = data[i] << 16;
    if (i + 1 < len) v |= data[i + 1] << 8;
    if (i + 2 < len) v |= data[i + 2];
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(i + 1 < len ? kB64[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < len ? kB64[v & 63] : '=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<std::uint8_t> out;
  int buf = 0, bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = val(c);
    if (v < 0) throw FormatError("invalid base64 payload");
    buf = (buf << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((buf >> bits) & 0xff));
    }
  }
  return out;
}

}  // namespace

void serialize(const Sketch& s, const FeatureMapSpec& spec,
               std::ostream& out) {
  if (spec.fingerprint() != s.fingerprint)
    throw IncompatibleSketchError("serialize: spec does not match sketch");
  out.write(kMagic, 4);
  put(out, kVersion);
  write_header(out, header_from_spec(spec));
  put(out, s.n);
  const PrivacyRecord p = s.privacy.value_or(PrivacyRecord{});
  put(out, static_cast<std::uint8_t>(p.mechanism));
  put(out, p.epsilon);
  put(out, p.delta);
  for (Eigen::Index j = 0; j < s.values.size(); ++j) {
    put(out, s.values[j].real());
    put(out, s.values[j].imag());
  }
}

std::vector<std::uint8_t> serialize(const Sketch& s,
                                    const FeatureMapSpec& spec) {
  std::ostringstream out(std::ios::binary);
  serialize(s, spec, out);
  const std::string str = out.str();
  return {str.begin(), str.end()};
}

LoadedSketch deserialize(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("not a sketch file (bad magic)");
  if (get<std::uint16_t>(in) != kVersion)
    throw FormatError("unsupported sketch file version");
  const MapHeader h = read_header(in);
  FeatureMapSpec spec = spec_from_header(h);
  Sketch s;
  s.n = get<std::uint64_t>(in);
  const auto mech = static_cast<DpMechanism>(get<std::uint8_t>(in));
  const double eps = get<double>(in);
  const double delta = get<double>(in);
  if (mech != DpMechanism::none) s.privacy = PrivacyRecord{mech, eps, delta};
  s.values.resize(static_cast<Eigen::Index>(h.m));
  for (Eigen::Index j = 0; j < s.values.size(); ++j) {
    const double re = get<double>(in);
    const double im = get<double>(in);
    s.values[j] = {re, im};
  }
  s.fingerprint = spec.fingerprint();
  return {std::move(s), std::move(spec)};
}

LoadedSketch deserialize(const std::vector<std::uint8_t>& bytes) {
  std::istringstream in(std::string(bytes.begin(), bytes.end()),
                        std::ios::binary);
  return deserialize(in);
}

std::string to_json(const Sketch& s, const FeatureMapSpec& spec) {
  const std::vector<std::uint8_t> bytes = serialize(s, spec);
  nlohmann::json j;
  j["format"] = "cskl-sketch";
  j["version"] = kVersion;
  j["n"] = s.n;
  j["m"] = spec.feature_dim();
  j["d"] = spec.input_dim();
  j["payload_base64"] = base64_encode(bytes.data(), bytes.size());
  return j.dump(2);
}

LoadedSketch from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("sketch JSON parse error: ") + e.what());
  }
  if (!j.contains("payload_base64"))
    throw FormatError("sketch JSON missing payload");
  return deserialize(base64_decode(j["payload_base64"].get<std::string>()));
}

}  // namespace cskl
