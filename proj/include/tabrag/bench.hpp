#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabrag/dataset.hpp"
#include "tabrag/importance.hpp"
#include "tabrag/llm_client.hpp"
#include "tabrag/metrics.hpp"
#include "tabrag/prompt.hpp"
#include "tabrag/retrieval.hpp"
#include "tabrag/synthgen.hpp"

namespace tabrag {

// A table on disk or a generated toy set. Toy sets hold n_train + n_test
// rows; the split puts n_test random rows in the test set.
struct DatasetEntry {
  std::string id;
  std::filesystem::path table;
  std::filesystem::path schema;
  std::optional<std::filesystem::path> split_file;
  SplitRatios ratios;
  std::size_t train_cap = kDefaultTrainCap;
  std::size_t test_cap = kDefaultTestCap;
  std::optional<ToySpec> toy;
  std::size_t toy_n_test = 200;
};

enum class PredictorKind { kKnn, kLlm, kExternal };
std::string_view to_string(PredictorKind kind);

struct PredictorEntry {
  std::string id;
  PredictorKind kind = PredictorKind::kKnn;
  // kLlm
  LlmEndpoint endpoint;
  std::optional<std::filesystem::path> prompt_template;
  bool anonymize = false;
  std::size_t token_budget = kDefaultTokenBudget;
  // kExternal: prediction file per dataset id.
  std::map<std::string, std::filesystem::path> files;
};

enum class ContextPolicy { kRag, kRandom };
std::string_view to_string(ContextPolicy policy);
ContextPolicy parse_context_policy(std::string_view text);

struct RunConfig {
  std::vector<DatasetEntry> datasets;
  std::vector<PredictorEntry> predictors;
  // quota is taken from each entry of context_sizes.
  RetrievalConfig retrieval;
  std::vector<ContextPolicy> policies{ContextPolicy::kRag};
  std::vector<std::size_t> context_sizes{16};
  // Empty: the full training split only.
  std::vector<std::size_t> train_sizes;
  PpsOptions pps;
  std::filesystem::path output_dir = "tabrag-run";
  std::uint64_t seed = 0;
  std::size_t workers = 1;  // datasets in parallel
  std::size_t threads = 1;  // test rows in parallel within a dataset
  bool traces = false;
  // Shuffle the kept context rows before prompting (LLM predictors); the
  // default keeps ascending distance order.
  bool shuffle_context = false;
};

// Parses the JSON config. Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& file);
std::string run_config_to_json(const RunConfig& cfg);

// Problems found without running anything (missing files, empty sweeps,
// duplicate ids, unusable combinations). Empty when the config is valid.
std::vector<std::string> validation_errors(const RunConfig& cfg);
// Throws InputError listing every problem.
void validate(const RunConfig& cfg);

// Named sub-seeds derived from the run seed.
struct SubSeeds {
  std::uint64_t split = 0;
  std::uint64_t subset = 0;
  std::uint64_t random_policy = 0;
  std::uint64_t pps = 0;
  std::uint64_t llm_jitter = 0;
  std::uint64_t context_shuffle = 0;
};
SubSeeds sub_seeds(std::uint64_t run_seed);

struct ScalingFit {
  std::string predictor;
  std::string policy;
  std::size_t context_size = 0;
  MetricKind metric = MetricKind::kAuroc;
  std::optional<PowerLawFit> fit;
  std::string note;  // why no fit was made
};

struct DatasetOutcome {
  std::string id;
  bool ok = true;
  std::string error;
  std::size_t n_rows = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

struct RunResult {
  std::filesystem::path directory;
  std::vector<MetricReport> reports;
  std::vector<ScalingFit> fits;
  std::vector<DatasetOutcome> outcomes;
};

// Runs every (dataset, train size, context size, policy, predictor)
// combination and writes predictions.csv, metrics.json, metrics.csv,
// fits.json and manifest.json (plus traces/ when enabled) to the output
// directory. Dataset failures are recorded in the manifest and skipped.
RunResult run(const RunConfig& cfg);

// Power-law fits of the median error across datasets (1 - AUROC or NMAE)
// against the training size, one per (predictor, policy, context size,
// metric) with at least two usable sizes.
std::vector<ScalingFit> fit_scaling(std::span<const MetricReport> reports);
std::string fits_to_json(std::span<const ScalingFit> fits);

// Error form of a metric value: 1 - AUROC, or NMAE.
double metric_error(MetricKind metric, double value);

// compare ------------------------------------------------------------------

struct DatasetScore {
  MetricKind metric = MetricKind::kAuroc;
  double value = 0.0;
};

struct MethodScores {
  std::string method;
  std::map<std::string, DatasetScore> by_dataset;
};

// One method per (label, predictor, policy) in the reports; the score for a
// dataset is the record with the largest (train size, context size).
// Undefined values are dropped.
std::vector<MethodScores> methods_from_reports(std::string_view label,
                                               std::span<const MetricReport> reports);

struct GapRow {
  std::string dataset;
  double a = 0.0;
  double b = 0.0;
  double gap = 0.0;  // oriented: positive means method a is better
};

struct Comparison {
  std::string method_a;
  std::string method_b;
  std::vector<GapRow> gaps;  // sorted by gap, descending
  // Fraction of shared datasets where a is strictly better; ties count for
  // neither side.
  double fraction_a_better = 0.0;
  double fraction_b_better = 0.0;
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  // normalized[d][m], min-max within each dataset's method group (1 = best).
  std::vector<std::vector<double>> normalized;
};

// Throws InputError when a and b share no dataset. Other methods join the
// normalized table on the shared datasets.
Comparison compare(std::span<const MethodScores> methods, std::size_t a, std::size_t b);
std::string comparison_to_json(const Comparison& c);
std::string gap_table_csv(const Comparison& c);
std::string normalized_table_csv(const Comparison& c);

// ablate -------------------------------------------------------------------

struct AblationVariant {
  std::string name;
  RunConfig config;
};

// full, NoFeatImp (uniform weights), NoNorm (raw values, no distance
// rescaling), NoCorr (PPS only), NoPPS (Pearson only), each writing to
// <output_dir>/<name>.
std::vector<AblationVariant> ablation_variants(const RunConfig& base);

struct AblationResult {
  std::vector<AblationVariant> variants;
  std::vector<RunResult> runs;
  Comparison table;
};

// Runs all five variants and writes ablation.json plus ablation.csv (the
// normalized table) to the base output directory.
AblationResult ablate(const RunConfig& base);

// scaling ------------------------------------------------------------------

// Runs the config with both the rag and random policies; needs at least two
// training sizes.
RunResult scaling(RunConfig cfg);

}  // namespace tabrag
