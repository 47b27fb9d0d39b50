#include "tabrag/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>

#include <json.hpp>

#include "tabrag/error.hpp"
#include "tabrag/random.hpp"
#include "tabrag/text.hpp"

namespace tabrag {

using nlohmann::json;

// ---------------------------------------------------------------------------
// ContextPool

ContextPool ContextPool::build(std::shared_ptr<const Dataset> data,
                               std::vector<std::size_t> train_rows, const PoolOptions& options) {
  if (!data) throw ContractError("context pool needs a dataset");
  if (train_rows.empty()) throw ContractError("context pool needs at least one training row");
  for (std::size_t r : train_rows) {
    if (r >= data->num_rows()) throw ContractError("pool row index out of range");
  }

  ContextPool pool;
  pool.data_ = std::move(data);
  pool.rows_ = std::move(train_rows);
  const Dataset& d = *pool.data_;

  for (std::size_t col : d.feature_columns()) {
    const ColumnSchema& schema = d.schema()[col];
    pool.features_.push_back({schema.name, col, d.column(col).kind});
  }
  for (const auto& [name, mode] : options.norm_overrides) {
    if (!d.find_column(name)) throw ContractError("normalization override for unknown feature: " + name);
  }

  const std::size_t nf = pool.features_.size();
  pool.stats_.resize(nf);
  pool.built_modes_.assign(nf, options.numeric_norm);
  pool.normalized_.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const PoolFeature& feature = pool.features_[f];
    if (feature.kind != ColumnKind::kNumerical) continue;
    if (auto it = options.norm_overrides.find(feature.name); it != options.norm_overrides.end()) {
      pool.built_modes_[f] = it->second;
    }
    pool.stats_[f] = fit_column_stats(d, feature.column, pool.rows_, pool.built_modes_[f]);
    const auto& values = d.column(feature.column).numbers;
    auto& out = pool.normalized_[f];
    out.reserve(pool.rows_.size());
    for (std::size_t r : pool.rows_) out.push_back(apply(*pool.stats_[f], values[r]));
  }

  if (options.weights) {
    if (options.weights->features.size() != nf) {
      throw ContractError("supplied feature weights do not match the dataset features");
    }
    pool.weights_ = *options.weights;
  } else {
    pool.weights_ = compute_feature_weights(d, pool.rows_, options.pps);
  }
  return pool;
}

std::size_t ContextPool::feature_index(std::string_view name) const {
  for (std::size_t f = 0; f < features_.size(); ++f) {
    if (features_[f].name == name) return f;
  }
  throw ContractError("unknown feature: " + std::string(name));
}

std::vector<double> ContextPool::normalized(std::size_t f, NormMode mode) const {
  if (!stats_.at(f)) throw ContractError("feature is not numerical: " + features_[f].name);
  if (mode == built_modes_[f]) return normalized_[f];
  const auto& values = data_->column(features_[f].column).numbers;
  std::vector<double> out;
  out.reserve(rows_.size());
  for (std::size_t r : rows_) out.push_back(apply(*stats_[f], values[r], mode));
  return out;
}

double ContextPool::label_mean() const {
  double sum = 0.0;
  for (std::size_t r : rows_) sum += data_->label_value(r);
  return sum / static_cast<double>(rows_.size());
}

Query ContextPool::query_from_row(std::size_t dataset_row) const {
  if (dataset_row >= data_->num_rows()) throw ContractError("query row out of range");
  Query q;
  q.numbers.assign(features_.size(), std::nan(""));
  q.codes.assign(features_.size(), kUnseenCategory);
  for (std::size_t f = 0; f < features_.size(); ++f) {
    const Column& col = data_->column(features_[f].column);
    if (features_[f].kind == ColumnKind::kNumerical) {
      q.numbers[f] = col.numbers[dataset_row];
    } else {
      q.codes[f] = col.codes[dataset_row];
    }
  }
  return q;
}

Query ContextPool::query_from_cells(std::span<const Cell> cells) const {
  if (cells.size() != features_.size()) {
    throw ContractError("query needs one cell per feature (" + std::to_string(features_.size()) +
                        "), got " + std::to_string(cells.size()));
  }
  Query q;
  q.numbers.assign(features_.size(), std::nan(""));
  q.codes.assign(features_.size(), kUnseenCategory);
  for (std::size_t f = 0; f < features_.size(); ++f) {
    const Cell& cell = cells[f];
    if (features_[f].kind == ColumnKind::kNumerical) {
      if (const auto* d = std::get_if<double>(&cell)) {
        q.numbers[f] = std::isfinite(*d) ? *d : std::nan("");
      } else if (const auto* s = std::get_if<std::string>(&cell)) {
        q.numbers[f] = parse_number(*s).value_or(std::nan(""));
      }
    } else {
      std::string token;
      if (const auto* s = std::get_if<std::string>(&cell)) token = *s;
      if (const auto* d = std::get_if<double>(&cell)) token = format_number(*d);
      q.codes[f] = data_->column(features_[f].column).find_code(token);
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Distances

NormMode RetrievalConfig::norm_for(const std::string& feature) const {
  if (auto it = norm_overrides.find(feature); it != norm_overrides.end()) return it->second;
  return numeric_norm;
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kPearsonHalf:
      return "pearson-half";
    case Provenance::kPpsHalf:
      return "pps-half";
    case Provenance::kMerged:
      return "merged";
    case Provenance::kRandom:
      return "random";
  }
  return "merged";
}

namespace {

std::vector<double> distances_for(const ContextPool& pool, const Query& query, std::size_t f,
                                  const RetrievalConfig& cfg,
                                  std::span<const std::size_t> positions) {
  const PoolFeature& feature = pool.features()[f];
  std::vector<double> out(positions.size(), 0.0);
  const Column& col = pool.data().column(feature.column);
  const auto rows = pool.rows();

  if (feature.kind == ColumnKind::kCategorical) {
    const std::int32_t q = query.codes.at(f);
    for (std::size_t i = 0; i < positions.size(); ++i) {
      out[i] = col.codes[rows[positions[i]]] == q ? 0.0 : 1.0;
    }
    return out;
  }

  const NormMode mode = cfg.norm_for(feature.name);
  const ColumnStats& stats = *pool.stats(f);
  const double q = apply(stats, query.numbers.at(f), mode);
  if (is_missing(q)) {
    std::fill(out.begin(), out.end(), 1.0);
    return out;
  }
  std::vector<double> scratch;
  std::span<const double> normalized;
  if (mode == pool.built_norm(f)) {
    normalized = pool.built_normalized(f);
  } else {
    scratch = pool.normalized(f, mode);
    normalized = scratch;
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const double v = normalized[positions[i]];
    if (is_missing(v)) {
      out[i] = std::nan("");
      continue;
    }
    out[i] = std::abs(q - v);
    lo = std::min(lo, out[i]);
    hi = std::max(hi, out[i]);
  }
  const bool rescale = cfg.distance_minmax_rescale;
  const double span = hi - lo;
  for (double& d : out) {
    if (is_missing(d)) {
      d = 1.0;
    } else if (rescale) {
      d = span > 0.0 ? (d - lo) / span : 0.0;
    }
  }
  return out;
}

std::vector<std::size_t> all_positions(const ContextPool& pool) {
  std::vector<std::size_t> positions(pool.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  return positions;
}

// Eligible positions sorted by (distance, dataset row index).
std::vector<std::size_t> rank(std::span<const double> distance,
                              std::span<const std::size_t> row_ids) {
  std::vector<std::size_t> order(distance.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (distance[a] != distance[b]) return distance[a] < distance[b];
    return row_ids[a] < row_ids[b];
  });
  return order;
}

}  // namespace

std::vector<double> feature_distance(const ContextPool& pool, const Query& query,
                                     std::string_view feature, const RetrievalConfig& cfg,
                                     std::span<const std::size_t> positions) {
  return distances_for(pool, query, pool.feature_index(feature), cfg, positions);
}

std::vector<double> feature_distance(const ContextPool& pool, const Query& query,
                                     std::string_view feature, const RetrievalConfig& cfg) {
  return feature_distance(pool, query, feature, cfg, all_positions(pool));
}

std::vector<double> aggregate(std::span<const std::vector<double>> per_feature,
                              std::span<const double> weights) {
  if (per_feature.size() != weights.size()) {
    throw ContractError("aggregate: " + std::to_string(per_feature.size()) +
                        " distance columns but " + std::to_string(weights.size()) + " weights");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("aggregate: weights must be finite and >= 0");
  }
  const std::size_t n = per_feature.empty() ? 0 : per_feature.front().size();
  for (const auto& column : per_feature) {
    if (column.size() != n) throw ContractError("aggregate: ragged distance matrix");
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t f = 0; f < per_feature.size(); ++f) {
    const double w = weights[f];
    if (w == 0.0) continue;
    const auto& column = per_feature[f];
    for (std::size_t r = 0; r < n; ++r) out[r] += column[r] * column[r] * w;
  }
  for (double& v : out) v = std::sqrt(v);
  return out;
}

std::vector<std::size_t> eligible_positions(const ContextPool& pool, const Query& query,
                                            const RetrievalConfig& cfg) {
  std::vector<std::pair<const Column*, std::int32_t>> constraints;
  for (const auto& name : cfg.match_constraints) {
    const std::size_t f = pool.feature_index(name);
    if (pool.features()[f].kind != ColumnKind::kCategorical) {
      throw ContractError("match constraint needs a categorical feature: " + name);
    }
    constraints.emplace_back(&pool.data().column(pool.features()[f].column), query.codes.at(f));
  }
  std::vector<std::size_t> positions;
  const auto rows = pool.rows();
  for (std::size_t p = 0; p < rows.size(); ++p) {
    bool ok = true;
    for (const auto& [col, code] : constraints) {
      if (col->codes[rows[p]] != code) {
        ok = false;
        break;
      }
    }
    if (ok) positions.push_back(p);
  }
  return positions;
}

RetrievedContext retrieve(const ContextPool& pool, const Query& query, const RetrievalConfig& cfg) {
  if (cfg.quota == 0) throw ContractError("retrieval quota must be at least 1");
  if (query.numbers.size() != pool.features().size() ||
      query.codes.size() != pool.features().size()) {
    throw ContractError("query does not match the pool's feature layout");
  }
  const auto positions = eligible_positions(pool, query, cfg);
  RetrievedContext ctx;
  if (positions.empty()) return ctx;

  const std::size_t nf = pool.features().size();
  std::vector<std::vector<double>> per_feature(nf);
  for (std::size_t f = 0; f < nf; ++f) per_feature[f] = distances_for(pool, query, f, cfg, positions);

  std::vector<std::size_t> row_ids(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) row_ids[i] = pool.rows()[positions[i]];

  const RankingWeights weights = combine(pool.weights(), cfg.importance_mode);
  const std::vector<double> primary = aggregate(per_feature, weights.primary);
  const std::vector<std::size_t> primary_order = rank(primary, row_ids);
  const std::size_t quota = std::min(cfg.quota, positions.size());

  // (distance, row, provenance) of every selected row.
  struct Pick {
    double distance;
    std::size_t row;
    Provenance provenance;
  };
  std::vector<Pick> picks;
  picks.reserve(quota);

  if (!weights.secondary) {
    for (std::size_t i = 0; i < quota; ++i) {
      const std::size_t e = primary_order[i];
      picks.push_back({primary[e], row_ids[e], Provenance::kMerged});
    }
  } else {
    const std::size_t first_half = (quota + 1) / 2;
    std::vector<bool> taken(positions.size(), false);
    for (std::size_t i = 0; i < first_half; ++i) {
      const std::size_t e = primary_order[i];
      taken[e] = true;
      picks.push_back({primary[e], row_ids[e], Provenance::kPearsonHalf});
    }
    const std::vector<double> secondary = aggregate(per_feature, *weights.secondary);
    const std::vector<std::size_t> secondary_order = rank(secondary, row_ids);
    for (std::size_t e : secondary_order) {
      if (picks.size() == quota) break;
      if (taken[e]) continue;
      taken[e] = true;
      picks.push_back({secondary[e], row_ids[e], Provenance::kPpsHalf});
    }
  }

  std::sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.row < b.row;
  });
  for (const Pick& p : picks) {
    ctx.rows.push_back(p.row);
    ctx.distances.push_back(p.distance);
    ctx.provenance.push_back(p.provenance);
  }
  return ctx;
}

RetrievedContext retrieve_random(const ContextPool& pool, std::size_t quota, std::uint64_t seed) {
  std::vector<std::size_t> rows(pool.rows().begin(), pool.rows().end());
  RetrievedContext ctx;
  ctx.rows = sample_without_replacement(std::move(rows), quota, seed);
  ctx.distances.assign(ctx.rows.size(), 0.0);
  ctx.provenance.assign(ctx.rows.size(), Provenance::kRandom);
  return ctx;
}

std::string trace_to_json(std::size_t query_row, const RetrievedContext& ctx) {
  json doc;
  doc["query"] = query_row;
  doc["selected"] = ctx.rows;
  doc["distances"] = ctx.distances;
  json tags = json::array();
  for (Provenance p : ctx.provenance) tags.push_back(std::string(to_string(p)));
  doc["provenance"] = tags;
  return doc.dump();
}

}  // namespace tabrag
