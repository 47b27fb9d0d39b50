#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tabrag/bench.hpp"
#include "tabrag/dataset.hpp"
#include "tabrag/error.hpp"
#include "tabrag/metrics.hpp"
#include "tabrag/predictors.hpp"
#include "tabrag/retrieval.hpp"
#include "tabrag/synthgen.hpp"

namespace py = pybind11;
using namespace tabrag;

namespace {

using DatasetPtr = std::shared_ptr<Dataset>;

std::vector<std::string> feature_names(const Dataset& d) {
  std::vector<std::string> out;
  for (std::size_t col : d.feature_columns()) out.push_back(d.schema()[col].name);
  return out;
}

py::dict context_to_dict(const RetrievedContext& ctx) {
  std::vector<std::string> tags;
  for (Provenance p : ctx.provenance) tags.emplace_back(to_string(p));
  py::dict out;
  out["rows"] = ctx.rows;
  out["distances"] = ctx.distances;
  out["provenance"] = tags;
  return out;
}

py::dict report_to_dict(const MetricReport& r) {
  py::dict out;
  out["dataset"] = r.dataset;
  out["predictor"] = r.predictor;
  out["metric"] = std::string(to_string(r.metric));
  out["value"] = r.value;
  out["n_test"] = r.n_test;
  out["train_size"] = r.train_size;
  out["context_size"] = r.context_size;
  out["policy"] = r.policy;
  return out;
}

}  // namespace

PYBIND11_MODULE(_tabrag, m) {
  m.doc() = "Retrieval-augmented tabular in-context learning toolkit";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", error.ptr());
  py::register_exception<ContractError>(m, "ContractError", error.ptr());
  py::register_exception<TransportError>(m, "TransportError", error.ptr());

  py::class_<Dataset, DatasetPtr>(m, "Dataset")
      .def_property_readonly("num_rows", &Dataset::num_rows)
      .def_property_readonly("task", [](const Dataset& d) { return std::string(to_string(d.task())); })
      .def_property_readonly("label", &Dataset::label_name)
      .def_property_readonly("features", &feature_names)
      .def_property_readonly("classes", [](const Dataset& d) {
        return d.task() == TaskKind::kClassification ? d.class_labels() : std::vector<std::string>{};
      })
      .def("cell", &Dataset::cell_text, py::arg("row"), py::arg("column"))
      .def("to_csv", &dataset_to_csv)
      .def("__len__", &Dataset::num_rows);

  m.def("load_dataset", [](const std::filesystem::path& table, const std::filesystem::path& schema) {
    return std::make_shared<Dataset>(load_dataset(table, schema));
  }, py::arg("table"), py::arg("schema"));
  m.def("generate_toy", [](const std::string& shape, double noise, std::size_t n, std::uint64_t seed) {
    return std::make_shared<Dataset>(generate_toy({parse_toy_shape(shape), noise, n, seed}));
  }, py::arg("shape"), py::arg("noise") = 0.1, py::arg("n") = 128, py::arg("seed") = 0);
  m.def("make_split", [](const Dataset& d, std::uint64_t seed) {
    const auto s = make_split(d, SplitRatios{}, seed);
    return py::make_tuple(s.train, s.validation, s.test);
  }, py::arg("dataset"), py::arg("seed") = 0);

  py::class_<ContextPool>(m, "ContextPool")
      .def(py::init([](DatasetPtr data, std::vector<std::size_t> rows, const std::string& numeric_norm) {
        PoolOptions opts;
        opts.numeric_norm = parse_norm_mode(numeric_norm);
        return ContextPool::build(std::move(data), std::move(rows), opts);
      }), py::arg("dataset"), py::arg("rows"), py::arg("numeric_norm") = "quantile")
      .def_property_readonly("size", &ContextPool::size)
      .def_property_readonly("weights", [](const ContextPool& p) {
        py::dict out;
        out["features"] = p.weights().features;
        out["pearson"] = p.weights().pearson;
        out["pps"] = p.weights().pps;
        return out;
      })
      .def("retrieve", [](const ContextPool& p, std::size_t row, std::size_t quota, const std::string& mode,
                          const std::string& numeric_norm, bool rescale, std::vector<std::string> constraints) {
        RetrievalConfig cfg;
        cfg.quota = quota;
        cfg.importance_mode = parse_importance_mode(mode);
        cfg.numeric_norm = parse_norm_mode(numeric_norm);
        cfg.distance_minmax_rescale = rescale;
        cfg.match_constraints = std::move(constraints);
        return context_to_dict(retrieve(p, p.query_from_row(row), cfg));
      }, py::arg("row"), py::arg("quota") = 16, py::arg("importance_mode") = "dual",
         py::arg("numeric_norm") = "quantile", py::arg("rescale") = true,
         py::arg("match_constraints") = std::vector<std::string>{})
      .def("retrieve_random", [](const ContextPool& p, std::size_t quota, std::uint64_t seed) {
        return context_to_dict(retrieve_random(p, quota, seed));
      }, py::arg("quota") = 16, py::arg("seed") = 0)
      .def("knn", [](const ContextPool& p, std::vector<std::size_t> rows) {
        RetrievedContext ctx;
        ctx.rows = std::move(rows);
        ctx.distances.assign(ctx.rows.size(), 0.0);
        ctx.provenance.assign(ctx.rows.size(), Provenance::kMerged);
        const auto rec = knn_predict(p, ctx);
        py::dict out;
        out["probabilities"] = rec.class_probabilities;
        out["estimate"] = rec.estimate;
        return out;
      }, py::arg("context_rows"));

  m.def("binary_auroc", [](std::vector<int> labels, std::vector<double> scores) {
    return binary_auroc(labels, scores);
  }, py::arg("labels"), py::arg("scores"));
  m.def("auroc", [](std::vector<std::size_t> labels, std::vector<std::vector<double>> probs, std::size_t k) {
    return auroc(labels, probs, k);
  }, py::arg("labels"), py::arg("probabilities"), py::arg("num_classes"));
  m.def("nmae", [](std::vector<double> labels, std::vector<double> estimates) {
    return nmae(labels, estimates);
  }, py::arg("labels"), py::arg("estimates"));
  m.def("minmax_normalize", [](std::vector<double> values, bool higher_better) {
    return minmax_normalize(values, higher_better ? Orientation::kHigherBetter : Orientation::kLowerBetter);
  }, py::arg("values"), py::arg("higher_better") = true);
  m.def("fit_power_law", [](std::vector<std::pair<double, double>> points) {
    const auto f = fit_power_law(points);
    py::dict out;
    out["d_c"] = f.d_c;
    out["alpha"] = f.alpha;
    out["r_squared"] = f.r_squared;
    out["d_c_defined"] = f.d_c_defined;
    return out;
  }, py::arg("points"));

  m.def("validate_config", [](const std::filesystem::path& file) {
    return validation_errors(load_run_config(file));
  }, py::arg("config"));
  m.def("run", [](const std::filesystem::path& file, std::optional<std::filesystem::path> output_dir) {
    RunConfig cfg = load_run_config(file);
    if (output_dir) cfg.output_dir = *output_dir;
    RunResult r;
    {
      py::gil_scoped_release release;
      r = run(cfg);
    }
    py::list reports;
    for (const auto& rep : r.reports) reports.append(report_to_dict(rep));
    return reports;
  }, py::arg("config"), py::arg("output_dir") = std::nullopt);
}
