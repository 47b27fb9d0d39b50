#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabrag/dataset.hpp"

namespace tabrag {

// Per-feature relevance scores, aligned with Dataset::feature_columns().
struct FeatureWeights {
  std::vector<std::string> features;
  std::vector<double> pearson;
  std::vector<double> pps;

  std::size_t size() const { return features.size(); }
  std::size_t index_of(std::string_view feature) const;
};

enum class ImportanceMode { kDual, kPearsonOnly, kPpsOnly, kUniform };

std::string_view to_string(ImportanceMode mode);
ImportanceMode parse_importance_mode(std::string_view text);

// |Pearson r| over pairs where both values are present; 0 when fewer than
// two pairs remain or either side has zero variance.
double abs_pearson(std::span<const double> x, std::span<const double> y);

// |r| of every feature against the label over `rows`. Categorical features
// and classification labels enter as one-hot indicators and the weight is
// the largest |r| over indicator pairs.
std::vector<double> pearson_importance(const Dataset& data, std::span<const std::size_t> rows);

struct PpsOptions {
  std::size_t cv_folds = 4;
  int max_depth = 4;
  // Candidate thresholds are training quantiles at multiples of this step;
  // 1/step must be a whole number.
  double quantile_step = 0.02;
  // Larger pools are subsampled to this many rows before scoring.
  std::size_t sample_cap = 5000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  std::size_t quantile_steps() const;
};

// One feature against the label, with missing feature values already
// removed. Categorical x holds category codes; classification y holds
// class indices.
struct SingleFeatureProblem {
  bool categorical = false;
  std::vector<double> x;
  TaskKind task = TaskKind::kRegression;
  std::vector<double> y;
  std::size_t num_classes = 0;
};

// Fold id for each sample position: the samples are shuffled with `seed`
// and cut into contiguous folds, the first n % folds of which hold one
// extra sample.
std::vector<std::size_t> kfold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed);

// Candidate thresholds for a numerical training sample: order statistics at
// every quantile step (excluding 0 and 1), deduplicated, ascending.
std::vector<double> quantile_candidates(std::span<const double> values, std::size_t steps);

// Predictive power score of one feature: cross-validated single-feature
// tree compared with a naive baseline (median for regression, MAE metric;
// most frequent class for classification, weighted-F1 metric), clipped at 0.
double pps_score(const SingleFeatureProblem& problem, const PpsOptions& options);

std::vector<double> pps_importance(const Dataset& data, std::span<const std::size_t> rows,
                                   const PpsOptions& options = {});

FeatureWeights compute_feature_weights(const Dataset& data, std::span<const std::size_t> rows,
                                       const PpsOptions& options = {});

// Weight vectors used for ranking. Dual mode yields (pearson, pps); single
// modes yield one vector; uniform yields all ones.
struct RankingWeights {
  std::vector<double> primary;
  std::optional<std::vector<double>> secondary;
};

RankingWeights combine(const FeatureWeights& weights, ImportanceMode mode);

std::string weights_to_json(const FeatureWeights& weights);
FeatureWeights weights_from_json(std::string_view text);

}  // namespace tabrag
