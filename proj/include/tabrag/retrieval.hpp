#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabrag/dataset.hpp"
#include "tabrag/importance.hpp"
#include "tabrag/normalize.hpp"

namespace tabrag {

struct PoolOptions {
  // Normalization used for the precomputed pool matrix. Retrieval configs
  // that ask for a different mode are served by normalizing on the fly.
  NormMode numeric_norm = NormMode::kQuantile;
  std::map<std::string, NormMode> norm_overrides;
  PpsOptions pps;
  // Precomputed weights (for example loaded from a weights dump). When
  // absent they are computed from the pool rows.
  std::optional<FeatureWeights> weights;
};

struct PoolFeature {
  std::string name;
  std::size_t column = 0;  // index in the dataset schema
  ColumnKind kind = ColumnKind::kNumerical;
};

// Feature values of a query row, aligned with ContextPool::features().
// numbers[f] is used for numerical features (NaN = missing), codes[f] for
// categorical ones (kUnseenCategory for tokens the dataset never saw).
struct Query {
  std::vector<double> numbers;
  std::vector<std::int32_t> codes;
};

// Immutable retrieval index over the training rows of one dataset.
class ContextPool {
 public:
  static ContextPool build(std::shared_ptr<const Dataset> data, std::vector<std::size_t> train_rows,
                           const PoolOptions& options = {});

  const Dataset& data() const { return *data_; }
  const std::shared_ptr<const Dataset>& data_ptr() const { return data_; }
  // Dataset row indices, in pool order.
  std::span<const std::size_t> rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  const std::vector<PoolFeature>& features() const { return features_; }
  std::size_t feature_index(std::string_view name) const;
  // Stats of numerical feature f (nullopt for categorical features).
  const std::optional<ColumnStats>& stats(std::size_t f) const { return stats_[f]; }
  const FeatureWeights& weights() const { return weights_; }

  // Pool-order values of numerical feature f normalized under `mode`.
  std::vector<double> normalized(std::size_t f, NormMode mode) const;
  NormMode built_norm(std::size_t f) const { return built_modes_[f]; }
  std::span<const double> built_normalized(std::size_t f) const { return normalized_[f]; }

  // Mean label over the pool (regression only); empty-context fallback.
  double label_mean() const;

  Query query_from_row(std::size_t dataset_row) const;
  // One cell per feature, in feature order. Text cells for categorical
  // features are looked up in the dataset's category list.
  Query query_from_cells(std::span<const Cell> cells) const;

 private:
  std::shared_ptr<const Dataset> data_;
  std::vector<std::size_t> rows_;
  std::vector<PoolFeature> features_;
  std::vector<std::optional<ColumnStats>> stats_;
  std::vector<NormMode> built_modes_;
  std::vector<std::vector<double>> normalized_;
  FeatureWeights weights_;
};

enum class TieBreak { kDistanceThenRow };

struct RetrievalConfig {
  std::size_t quota = 16;
  ImportanceMode importance_mode = ImportanceMode::kDual;
  NormMode numeric_norm = NormMode::kQuantile;
  std::map<std::string, NormMode> norm_overrides;
  // Per-query min-max rescaling of numerical distances across the
  // eligible pool.
  bool distance_minmax_rescale = true;
  // Categorical features whose value must equal the query's.
  std::vector<std::string> match_constraints;
  TieBreak tie_break = TieBreak::kDistanceThenRow;
  std::uint64_t seed = 0;

  NormMode norm_for(const std::string& feature) const;
};

enum class Provenance { kPearsonHalf, kPpsHalf, kMerged, kRandom };
std::string_view to_string(Provenance p);

struct RetrievedContext {
  std::vector<std::size_t> rows;  // dataset row indices
  std::vector<double> distances;
  std::vector<Provenance> provenance;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};

// Distances between the query and pool rows for one feature, in [0,1]
// when rescaling is on (unbounded raw distances otherwise). Categorical:
// 0/1 inequality. Numerical: |norm(query) - norm(row)|, min-max rescaled
// across the considered rows; a missing value on either side gives 1.
// `positions` selects pool positions; the overload without it covers the
// whole pool.
std::vector<double> feature_distance(const ContextPool& pool, const Query& query,
                                     std::string_view feature, const RetrievalConfig& cfg,
                                     std::span<const std::size_t> positions);
std::vector<double> feature_distance(const ContextPool& pool, const Query& query,
                                     std::string_view feature, const RetrievalConfig& cfg = {});

// Weighted L2 aggregation: sqrt(sum_i D_i^2 * w_i) for every row.
// per_feature[i][r] is the distance of row r on feature i.
std::vector<double> aggregate(std::span<const std::vector<double>> per_feature,
                              std::span<const double> weights);

// Pool positions whose categorical values match the query on every
// constrained feature.
std::vector<std::size_t> eligible_positions(const ContextPool& pool, const Query& query,
                                            const RetrievalConfig& cfg);

// Selects up to cfg.quota context rows. Dual mode takes ceil(quota/2)
// nearest rows by Pearson-weighted distance, then fills the rest from the
// PPS-weighted ranking, skipping rows already chosen. Single-vector modes
// take the quota nearest under that ranking. The result is ordered by
// (distance under the selecting ranking, row index).
RetrievedContext retrieve(const ContextPool& pool, const Query& query, const RetrievalConfig& cfg);

// Uniform sample without replacement (distances reported as 0), sorted by
// row index.
RetrievedContext retrieve_random(const ContextPool& pool, std::size_t quota, std::uint64_t seed);

std::string trace_to_json(std::size_t query_row, const RetrievedContext& ctx);

}  // namespace tabrag
