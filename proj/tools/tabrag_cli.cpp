#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tabrag/bench.hpp"
#include "tabrag/error.hpp"
#include "tabrag/metrics.hpp"
#include "tabrag/synthgen.hpp"
#include "tabrag/text.hpp"

namespace fs = std::filesystem;
using namespace tabrag;

namespace {

struct Overrides {
  std::string config;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> threads;
  std::vector<std::size_t> context_sizes;
  std::vector<std::size_t> train_sizes;
  bool traces = false;
};

void add_config_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--output-dir", o.output_dir, "Output directory");
  cmd->add_option("--seed", o.seed, "Run seed");
  cmd->add_option("--workers", o.workers, "Datasets processed in parallel");
  cmd->add_option("--threads", o.threads, "Test rows processed in parallel");
  cmd->add_option("--context-sizes", o.context_sizes, "Context sizes to sweep")->delimiter(',');
  cmd->add_option("--train-sizes", o.train_sizes, "Training sizes to sweep")->delimiter(',');
  cmd->add_flag("--traces", o.traces, "Write retrieval traces");
}

RunConfig load_with_overrides(const Overrides& o) {
  RunConfig cfg = load_run_config(o.config);
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.context_sizes.empty()) cfg.context_sizes = o.context_sizes;
  if (!o.train_sizes.empty()) cfg.train_sizes = o.train_sizes;
  if (o.traces) cfg.traces = true;
  return cfg;
}

void print_summary(const RunResult& r) {
  std::size_t failed = 0;
  for (const auto& o : r.outcomes) failed += o.ok ? 0 : 1;
  std::cout << "wrote " << r.directory.string() << ": " << r.reports.size() << " reports, "
            << r.fits.size() << " fits";
  if (failed > 0) std::cout << ", " << failed << " dataset(s) failed (see manifest.json)";
  std::cout << "\n";
}

fs::path metrics_path(const fs::path& input) {
  return fs::is_directory(input) ? input / "metrics.json" : input;
}

int find_method(const std::vector<MethodScores>& methods, const std::string& name) {
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (methods[i].method == name) return static_cast<int>(i);
  }
  throw InputError("no method named '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented tabular in-context learning toolkit"};
  app.require_subcommand(1);

  Overrides run_opts;
  auto* run_cmd = app.add_subcommand("run", "Run a benchmark config");
  add_config_options(run_cmd, run_opts);

  Overrides ablate_opts;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the five ablation variants of a config");
  add_config_options(ablate_cmd, ablate_opts);

  Overrides scaling_opts;
  auto* scaling_cmd = app.add_subcommand("scaling", "Sweep training sizes under the rag and random policies");
  add_config_options(scaling_cmd, scaling_opts);

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate-config", "Check a config without running it");
  validate_cmd->add_option("config,-c,--config", validate_path, "Run config (JSON)")->required();

  std::vector<std::string> compare_inputs;
  std::vector<std::string> compare_labels;
  std::string compare_a;
  std::string compare_b;
  std::string compare_out;
  auto* compare_cmd = app.add_subcommand("compare", "Compare methods across run directories");
  compare_cmd->add_option("inputs", compare_inputs, "Run directories or metrics.json files")
      ->required()
      ->check(CLI::ExistingPath);
  compare_cmd->add_option("--labels", compare_labels, "Label per input")->delimiter(',');
  compare_cmd->add_option("--a", compare_a, "Method a (label:predictor/policy)");
  compare_cmd->add_option("--b", compare_b, "Method b (label:predictor/policy)");
  compare_cmd->add_option("-o,--out", compare_out, "Directory for comparison.json and tables");

  std::string fit_input;
  std::string fit_out;
  auto* fit_cmd = app.add_subcommand("fit-powerlaw", "Fit L(D) = (D_c/D)^alpha to a D,L table");
  fit_cmd->add_option("input", fit_input, "CSV with columns D,L")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("-o,--out", fit_out, "Output JSON (default: stdout)");

  std::string toy_shape = "circle";
  double toy_noise = 0.1;
  std::size_t toy_n = 128;
  std::uint64_t boundary_seed = 0;
  std::string table_path;
  std::string schema_path;
  std::size_t resolution = kDefaultGridResolution;
  std::size_t quota = 16;
  std::string norm = "quantile";
  std::string importance = "dual";
  bool no_rescale = false;
  std::size_t boundary_threads = 1;
  std::string boundary_out = "boundary";
  auto* boundary_cmd = app.add_subcommand("boundary", "Export a KNN decision-boundary grid");
  boundary_cmd->add_option("--toy", toy_shape, "circle, moon or linear_rotation");
  boundary_cmd->add_option("--noise", toy_noise, "Toy noise level");
  boundary_cmd->add_option("--n-train", toy_n, "Toy training size");
  boundary_cmd->add_option("--seed", boundary_seed, "Toy seed");
  boundary_cmd->add_option("--table", table_path, "Training table instead of a toy set");
  boundary_cmd->add_option("--schema", schema_path, "Schema for --table");
  boundary_cmd->add_option("--resolution", resolution, "Cells per axis");
  boundary_cmd->add_option("--quota", quota, "Context size");
  boundary_cmd->add_option("--norm", norm, "quantile, standard, minmax or none");
  boundary_cmd->add_option("--importance", importance, "dual, pearson_only, pps_only or uniform");
  boundary_cmd->add_flag("--no-rescale", no_rescale, "Disable per-query distance rescaling");
  boundary_cmd->add_option("--threads", boundary_threads, "Cells evaluated in parallel");
  boundary_cmd->add_option("-o,--out", boundary_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      print_summary(run(load_with_overrides(run_opts)));
    } else if (*ablate_cmd) {
      const RunConfig cfg = load_with_overrides(ablate_opts);
      const AblationResult r = ablate(cfg);
      for (const auto& run : r.runs) print_summary(run);
      std::cout << normalized_table_csv(r.table);
    } else if (*scaling_cmd) {
      const RunResult r = scaling(load_with_overrides(scaling_opts));
      print_summary(r);
      std::cout << fits_to_json(r.fits);
    } else if (*validate_cmd) {
      const RunConfig cfg = load_run_config(validate_path);
      const auto errors = validation_errors(cfg);
      if (!errors.empty()) {
        for (const auto& e : errors) std::cerr << "error: " << e << "\n";
        return 1;
      }
      std::cout << "config ok: " << cfg.datasets.size() << " dataset(s), " << cfg.predictors.size()
                << " predictor(s)\n";
    } else if (*compare_cmd) {
      if (!compare_labels.empty() && compare_labels.size() != compare_inputs.size()) {
        throw InputError("--labels needs one label per input");
      }
      std::vector<MethodScores> methods;
      for (std::size_t i = 0; i < compare_inputs.size(); ++i) {
        const std::string label = compare_labels.empty() ? "run" + std::to_string(i + 1) : compare_labels[i];
        const auto reports = reports_from_json(read_text_file(metrics_path(compare_inputs[i])));
        for (auto& m : methods_from_reports(label, reports)) methods.push_back(std::move(m));
      }
      if (methods.size() < 2) throw InputError("compare needs at least two methods");
      const int a = compare_a.empty() ? 0 : find_method(methods, compare_a);
      int b = 1;
      if (!compare_b.empty()) {
        b = find_method(methods, compare_b);
      } else if (compare_inputs.size() > 1 && compare_a.empty()) {
        // Default: first method of the first input against the first of the second.
        const std::string prefix = (compare_labels.empty() ? std::string("run2") : compare_labels[1]) + ":";
        for (std::size_t i = 0; i < methods.size(); ++i) {
          if (methods[i].method.rfind(prefix, 0) == 0) {
            b = static_cast<int>(i);
            break;
          }
        }
      }
      const Comparison c = compare(methods, static_cast<std::size_t>(a), static_cast<std::size_t>(b));
      std::cout << gap_table_csv(c);
      std::cout << "fraction " << c.method_a << " better: " << format_number(c.fraction_a_better) << "\n";
      std::cout << "fraction " << c.method_b << " better: " << format_number(c.fraction_b_better) << "\n";
      if (!compare_out.empty()) {
        write_text_file(fs::path(compare_out) / "comparison.json", comparison_to_json(c));
        write_text_file(fs::path(compare_out) / "gaps.csv", gap_table_csv(c));
        write_text_file(fs::path(compare_out) / "normalized.csv", normalized_table_csv(c));
      }
    } else if (*fit_cmd) {
      auto records = read_csv_file(fit_input);
      std::erase_if(records, [](const CsvRecord& r) { return r.size() == 1 && r[0].empty(); });
      if (records.empty() || records[0].size() != 2) throw InputError("expected a D,L header");
      std::vector<std::pair<double, double>> points;
      for (std::size_t i = 1; i < records.size(); ++i) {
        const auto d = records[i].size() == 2 ? parse_number(records[i][0]) : std::nullopt;
        const auto l = records[i].size() == 2 ? parse_number(records[i][1]) : std::nullopt;
        if (!d || !l) throw InputError("bad D,L row at line " + std::to_string(i + 1));
        points.emplace_back(*d, *l);
      }
      const std::string text = fit_to_json(fit_power_law(points));
      if (fit_out.empty()) {
        std::cout << text;
      } else {
        write_text_file(fit_out, text);
      }
    } else if (*boundary_cmd) {
      std::shared_ptr<const Dataset> data;
      if (!table_path.empty()) {
        if (schema_path.empty()) throw InputError("--table needs --schema");
        data = std::make_shared<Dataset>(load_dataset(table_path, schema_path));
      } else {
        data = std::make_shared<Dataset>(generate_toy({parse_toy_shape(toy_shape), toy_noise, toy_n, boundary_seed}));
      }
      std::vector<std::size_t> rows(data->num_rows());
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
      RetrievalConfig cfg;
      cfg.quota = quota;
      cfg.numeric_norm = parse_norm_mode(norm);
      cfg.importance_mode = parse_importance_mode(importance);
      cfg.distance_minmax_rescale = !no_rescale;
      PoolOptions options;
      options.numeric_norm = cfg.numeric_norm;
      const ContextPool pool = ContextPool::build(data, rows, options);
      const NamedGridPredictor predictors[] = {{"knn", knn_grid_predictor()}};
      const BoundaryGrid grid = boundary_grid(pool, predictors, cfg, resolution, boundary_threads);
      write_text_file(fs::path(boundary_out) / "grid.json", grid_header_json(grid));
      write_text_file(fs::path(boundary_out) / "grid.csv", grid_to_csv(grid, 0));
      write_text_file(fs::path(boundary_out) / "train.csv", dataset_to_csv(*data));
      std::cout << "wrote " << boundary_out << "/grid.csv (" << resolution << "x" << resolution << ")\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
