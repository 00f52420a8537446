#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "cskl/baselines.hpp"
#include "cskl/errors.hpp"
#include "cskl/feature_map.hpp"
#include "cskl/privacy.hpp"
#include "cskl/sketch.hpp"
#include "cskl/solvers.hpp"
#include "cskl/transform.hpp"

namespace py = pybind11;
using namespace cskl;

PYBIND11_MODULE(_cskl, m) {
  m.doc() = "compressive learning: feature maps, mergeable sketches, "
            "sketch-domain solvers, differential privacy";

  py::register_exception<IncompatibleSketchError>(m, "IncompatibleSketchError",
                                                  PyExc_ValueError);
  py::register_exception<SealedSketchError>(m, "SealedSketchError",
                                            PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError",
                                         PyExc_ArithmeticError);

  py::enum_<MapKind>(m, "MapKind")
      .value("rff_complex", MapKind::rff_complex)
      .value("rff_quantized", MapKind::rff_quantized)
      .value("quadratic", MapKind::quadratic)
      .value("outer_product", MapKind::outer_product);

  py::enum_<OperatorKind>(m, "OperatorKind")
      .value("dense", OperatorKind::dense)
      .value("structured", OperatorKind::structured);

  py::enum_<DpMechanism>(m, "DpMechanism")
      .value("none", DpMechanism::none)
      .value("laplace", DpMechanism::laplace)
      .value("gaussian", DpMechanism::gaussian);

  py::enum_<Task>(m, "Task")
      .value("kmeans", Task::kmeans)
      .value("gmm", Task::gmm)
      .value("pca", Task::pca)
      .value("regress", Task::regress);

  py::class_<FrequencyOperator, std::shared_ptr<FrequencyOperator>>(
      m, "FrequencyOperator")
      .def_static(
          "build_dense",
          [](std::size_t m_, std::size_t d, double sigma_w,
             std::uint64_t seed) {
            return std::make_shared<FrequencyOperator>(
                FrequencyOperator::build_dense(m_, d, sigma_w, seed));
          },
          py::arg("m"), py::arg("d"), py::arg("sigma_w"), py::arg("seed"))
      .def_static(
          "build_structured",
          [](std::size_t m_, std::size_t d, double sigma_w,
             std::uint64_t seed) {
            return std::make_shared<FrequencyOperator>(
                FrequencyOperator::build_structured(m_, d, sigma_w, seed));
          },
          py::arg("m"), py::arg("d"), py::arg("sigma_w"), py::arg("seed"))
      .def("apply", &FrequencyOperator::apply, py::arg("x"))
      .def("materialize", &FrequencyOperator::materialize)
      .def_property_readonly("kind", &FrequencyOperator::kind)
      .def_property_readonly("rows", &FrequencyOperator::rows)
      .def_property_readonly("dim", &FrequencyOperator::dim)
      .def_property_readonly("padded_dim", &FrequencyOperator::padded_dim)
      .def_property_readonly("sigma_w", &FrequencyOperator::sigma_w)
      .def_property_readonly("seed", &FrequencyOperator::seed);

  py::class_<FeatureMapSpec>(m, "FeatureMapSpec")
      .def_static("rff_complex",
                  [](std::shared_ptr<FrequencyOperator> op) {
                    return FeatureMapSpec::rff_complex(std::move(op));
                  },
                  py::arg("op"))
      .def_static("rff_quantized",
                  [](std::shared_ptr<FrequencyOperator> op,
                     std::uint64_t dither_seed) {
                    return FeatureMapSpec::rff_quantized(std::move(op),
                                                         dither_seed);
                  },
                  py::arg("op"), py::arg("dither_seed"))
      .def_static("quadratic",
                  [](std::shared_ptr<FrequencyOperator> op) {
                    return FeatureMapSpec::quadratic(std::move(op));
                  },
                  py::arg("op"))
      .def_static("outer_product", &FeatureMapSpec::outer_product,
                  py::arg("d"))
      .def("evaluate", &FeatureMapSpec::evaluate, py::arg("x"))
      .def_property_readonly("kind", &FeatureMapSpec::kind)
      .def_property_readonly("feature_dim", &FeatureMapSpec::feature_dim)
      .def_property_readonly("input_dim", &FeatureMapSpec::input_dim)
      .def_property_readonly("dither", &FeatureMapSpec::dither)
      .def_property_readonly("fingerprint", &FeatureMapSpec::fingerprint);

  py::class_<PrivacyRecord>(m, "PrivacyRecord")
      .def_readonly("mechanism", &PrivacyRecord::mechanism)
      .def_readonly("epsilon", &PrivacyRecord::epsilon)
      .def_readonly("delta", &PrivacyRecord::delta);

  py::class_<Sketch>(m, "Sketch")
      .def_readonly("values", &Sketch::values)
      .def_readonly("n", &Sketch::n)
      .def_readonly("fingerprint", &Sketch::fingerprint)
      .def_readonly("privacy", &Sketch::privacy)
      .def_property_readonly("sealed", &Sketch::sealed);

  py::class_<SketchBuilder>(m, "SketchBuilder")
      .def(py::init<const FeatureMapSpec&>(), py::arg("spec"))
      .def("add", &SketchBuilder::add, py::arg("x"))
      .def("finish", &SketchBuilder::finish)
      .def_property_readonly("count", &SketchBuilder::count);

  m.def("sketch_dataset",
        [](const Eigen::Ref<const Eigen::MatrixXd>& rows,
           const FeatureMapSpec& spec) { return sketch_dataset(rows, spec); },
        py::arg("rows"), py::arg("spec"));
  m.def("merge", static_cast<Sketch (*)(const Sketch&, const Sketch&)>(
                     &cskl::merge),
        py::arg("s1"), py::arg("s2"));
  m.def("update",
        static_cast<Sketch (*)(const Sketch&,
                               const Eigen::Ref<const Eigen::VectorXd>&,
                               const FeatureMapSpec&)>(&cskl::update),
        py::arg("s"), py::arg("x"), py::arg("spec"));
  m.def("remove",
        static_cast<Sketch (*)(const Sketch&,
                               const Eigen::Ref<const Eigen::VectorXd>&,
                               const FeatureMapSpec&)>(&cskl::remove),
        py::arg("s"), py::arg("x"), py::arg("spec"));
  m.def("serialize",
        [](const Sketch& s, const FeatureMapSpec& spec) {
          const std::vector<std::uint8_t> bytes = serialize(s, spec);
          return py::bytes(reinterpret_cast<const char*>(bytes.data()),
                           bytes.size());
        },
        py::arg("sketch"), py::arg("spec"));
  m.def("deserialize",
        [](const py::bytes& blob) {
          const std::string str = blob;
          const LoadedSketch loaded =
              deserialize(std::vector<std::uint8_t>(str.begin(), str.end()));
          return py::make_tuple(loaded.sketch, loaded.spec);
        },
        py::arg("blob"));
  m.def("to_json", &to_json, py::arg("sketch"), py::arg("spec"));
  m.def("from_json",
        [](const std::string& text) {
          const LoadedSketch loaded = from_json(text);
          return py::make_tuple(loaded.sketch, loaded.spec);
        },
        py::arg("text"));

  m.def("rff", &rff, py::arg("spec"), py::arg("x"));
  m.def("rff_quantized", &rff_quantized, py::arg("spec"), py::arg("x"));
  m.def("quadratic", &quadratic, py::arg("spec"), py::arg("x"));
  m.def("outer_product", &outer_product, py::arg("x"));
  m.def("dirac_atom", &dirac_atom, py::arg("spec"), py::arg("c"));
  m.def("gaussian_atom", &gaussian_atom, py::arg("spec"), py::arg("mu"),
        py::arg("sigma2"));
  m.def("expected_kernel", &expected_kernel, py::arg("sigma_w"), py::arg("x"),
        py::arg("x_prime"));
  m.def("kernel_width_from_sigma_w", &kernel_width_from_sigma_w,
        py::arg("sigma_w"));
  m.def("sigma_w_from_kernel_width", &sigma_w_from_kernel_width,
        py::arg("sigma"));

  py::class_<CentroidModel>(m, "CentroidModel")
      .def_readonly("centroids", &CentroidModel::centroids)
      .def_readonly("weights", &CentroidModel::weights)
      .def_property_readonly("k", &CentroidModel::k)
      .def_property_readonly("d", &CentroidModel::d);

  py::class_<GmmModel>(m, "GmmModel")
      .def_readonly("weights", &GmmModel::weights)
      .def_readonly("means", &GmmModel::means)
      .def_readonly("variances", &GmmModel::variances)
      .def_property_readonly("k", &GmmModel::k)
      .def_property_readonly("d", &GmmModel::d);

  py::class_<LowRankPsd>(m, "LowRankPsd")
      .def_readonly("factor", &LowRankPsd::factor)
      .def("matrix", &LowRankPsd::matrix)
      .def("basis", &LowRankPsd::basis);

  py::class_<SolverOptions>(m, "SolverOptions")
      .def(py::init<>())
      .def_readwrite("restarts", &SolverOptions::restarts)
      .def_readwrite("tol", &SolverOptions::tol)
      .def_readwrite("max_refine_iters", &SolverOptions::max_refine_iters)
      .def_readwrite("box_lower", &SolverOptions::box_lower)
      .def_readwrite("box_upper", &SolverOptions::box_upper)
      .def_readwrite("seed", &SolverOptions::seed)
      .def_readwrite("variance_floor", &SolverOptions::variance_floor)
      .def_readwrite("ridge", &SolverOptions::ridge)
      .def_readwrite("condition_bound", &SolverOptions::condition_bound);

  m.def("clomp_kmeans", &clomp_kmeans, py::arg("sketch"), py::arg("k"),
        py::arg("spec"), py::arg("opts"));
  m.def("clomp_gmm", &clomp_gmm, py::arg("sketch"), py::arg("k"),
        py::arg("spec"), py::arg("opts"));
  m.def("fit_lowrank_psd", &fit_lowrank_psd, py::arg("sketch"), py::arg("k"),
        py::arg("spec"), py::arg("opts"));
  m.def("ls_regression", &ls_regression, py::arg("sketch"), py::arg("d1"),
        py::arg("d2"), py::arg("spec"), py::arg("opts") = SolverOptions{});
  m.def("dequantize", &dequantize, py::arg("sketch"),
        py::arg("quantized_spec"), py::arg("complex_spec"));
  m.def("nnls", &nnls, py::arg("atoms"), py::arg("target"));
  m.def("sketch_cost",
        py::overload_cast<const CentroidModel&, const Sketch&,
                          const FeatureMapSpec&>(&sketch_cost),
        py::arg("model"), py::arg("sketch"), py::arg("spec"));
  m.def("sketch_cost",
        py::overload_cast<const GmmModel&, const Sketch&,
                          const FeatureMapSpec&>(&sketch_cost),
        py::arg("model"), py::arg("sketch"), py::arg("spec"));
  m.def("sketch_cost",
        py::overload_cast<const LowRankPsd&, const Sketch&,
                          const FeatureMapSpec&>(&sketch_cost),
        py::arg("model"), py::arg("sketch"), py::arg("spec"));

  py::class_<SensitivityBounds>(m, "SensitivityBounds")
      .def_readonly("l1", &SensitivityBounds::l1)
      .def_readonly("l2", &SensitivityBounds::l2);
  m.def("sensitivity", &sensitivity, py::arg("spec"), py::arg("n"),
        py::arg("data_radius") = 0.0);
  m.def("privatize_laplace", &privatize_laplace, py::arg("sketch"),
        py::arg("spec"), py::arg("epsilon"), py::arg("seed"));
  m.def("privatize_gaussian", &privatize_gaussian, py::arg("sketch"),
        py::arg("spec"), py::arg("epsilon"), py::arg("delta"),
        py::arg("seed"));

  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("k", &SyntheticSpec::k)
      .def_readwrite("d", &SyntheticSpec::d)
      .def_readwrite("n", &SyntheticSpec::n)
      .def_readwrite("separation", &SyntheticSpec::separation)
      .def_readwrite("sigma", &SyntheticSpec::sigma)
      .def_readwrite("weights", &SyntheticSpec::weights)
      .def_readwrite("seed", &SyntheticSpec::seed);

  py::class_<SyntheticData>(m, "SyntheticData")
      .def_readonly("rows", &SyntheticData::rows)
      .def_readonly("truth", &SyntheticData::truth)
      .def_readonly("labels", &SyntheticData::labels);

  m.def("synth_gmm", &synth_gmm, py::arg("spec"));
  m.def("lloyd_kmeans", &lloyd_kmeans, py::arg("data"), py::arg("k"),
        py::arg("seed"));
  m.def("em_gmm", &em_gmm, py::arg("data"), py::arg("k"), py::arg("seed"));
  m.def("exact_pca", &exact_pca, py::arg("data"), py::arg("k"));
  m.def("empirical_risk",
        py::overload_cast<Task, const CentroidModel&,
                          const Eigen::Ref<const Eigen::MatrixXd>&>(
            &empirical_risk),
        py::arg("task"), py::arg("model"), py::arg("data"));
  m.def("empirical_risk",
        py::overload_cast<Task, const GmmModel&,
                          const Eigen::Ref<const Eigen::MatrixXd>&>(
            &empirical_risk),
        py::arg("task"), py::arg("model"), py::arg("data"));
  m.def("empirical_risk",
        py::overload_cast<Task, const Eigen::Ref<const Eigen::MatrixXd>&,
                          const Eigen::Ref<const Eigen::MatrixXd>&,
                          std::size_t>(&empirical_risk),
        py::arg("task"), py::arg("basis_or_theta"), py::arg("data"),
        py::arg("d1") = 0);
  m.def("kmeans_sse", &kmeans_sse, py::arg("data"), py::arg("centroids"));
  m.def("parzen_score", &parzen_score, py::arg("data"), py::arg("c"),
        py::arg("sigma"));
  m.def("mmd_gaussian_closed_form", &mmd_gaussian_closed_form, py::arg("p"),
        py::arg("q"), py::arg("sigma"));
}
