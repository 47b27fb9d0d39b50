#include "tabrag/normalize.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "tabrag/error.hpp"

namespace tabrag {

using nlohmann::json;

std::string_view to_string(NormMode mode) {
  switch (mode) {
    case NormMode::kQuantile:
      return "quantile";
    case NormMode::kStandard:
      return "standard";
    case NormMode::kMinMax:
      return "minmax";
    case NormMode::kNone:
      return "none";
  }
  return "quantile";
}

NormMode parse_norm_mode(std::string_view text) {
  if (text == "quantile") return NormMode::kQuantile;
  if (text == "standard") return NormMode::kStandard;
  if (text == "minmax") return NormMode::kMinMax;
  if (text == "none") return NormMode::kNone;
  throw ContractError("unknown normalization mode: " + std::string(text));
}

ColumnStats fit_column_stats(std::string name, std::span<const double> values, NormMode mode) {
  ColumnStats stats;
  stats.column = std::move(name);
  stats.mode = mode;

  std::vector<double> sorted;
  sorted.reserve(values.size());
  for (double v : values) {
    if (!is_missing(v)) sorted.push_back(v);
  }
  std::sort(sorted.begin(), sorted.end());
  stats.n_seen = sorted.size();
  if (sorted.empty()) return stats;

  stats.min = sorted.front();
  stats.max = sorted.back();
  double sum = 0.0;
  for (double v : sorted) sum += v;
  stats.mean = sum / static_cast<double>(sorted.size());
  double ss = 0.0;
  for (double v : sorted) ss += (v - stats.mean) * (v - stats.mean);
  stats.stddev = std::sqrt(ss / static_cast<double>(sorted.size()));

  if (sorted.size() <= kMaxQuantileKnots) {
    stats.quantile_knots = std::move(sorted);
  } else {
    stats.quantile_knots.resize(kMaxQuantileKnots);
    const double step = static_cast<double>(sorted.size() - 1) /
                        static_cast<double>(kMaxQuantileKnots - 1);
    for (std::size_t j = 0; j < kMaxQuantileKnots; ++j) {
      const auto idx = static_cast<std::size_t>(std::llround(static_cast<double>(j) * step));
      stats.quantile_knots[j] = sorted[std::min(idx, sorted.size() - 1)];
    }
  }
  return stats;
}

ColumnStats fit_column_stats(const Dataset& data, std::size_t column,
                             std::span<const std::size_t> rows, NormMode mode) {
  const Column& col = data.column(column);
  if (col.kind != ColumnKind::kNumerical) {
    throw ContractError("normalization stats need a numerical column: " +
                        data.schema()[column].name);
  }
  std::vector<double> values;
  values.reserve(rows.size());
  for (std::size_t r : rows) values.push_back(col.numbers.at(r));
  return fit_column_stats(data.schema()[column].name, values, mode);
}

std::vector<ColumnStats> fit_stats(const Dataset& data, std::span<const std::size_t> train_rows,
                                   std::span<const NormMode> modes) {
  std::vector<ColumnStats> out;
  std::size_t numerical = 0;
  for (std::size_t col : data.feature_columns()) {
    if (data.column(col).kind != ColumnKind::kNumerical) continue;
    NormMode mode = NormMode::kQuantile;
    if (!modes.empty()) {
      if (numerical >= modes.size()) throw ContractError("fit_stats: too few modes");
      mode = modes[numerical];
    }
    out.push_back(fit_column_stats(data, col, train_rows, mode));
    ++numerical;
  }
  if (!modes.empty() && numerical != modes.size()) {
    throw ContractError("fit_stats: one mode per numerical feature expected");
  }
  return out;
}

double quantile_position(std::span<const double> knots, double value) {
  const std::size_t k = knots.size();
  if (k < 2 || !(knots.back() > knots.front())) return 0.5;
  if (value < knots.front()) return 0.0;
  if (value > knots.back()) return 1.0;

  const auto lo = static_cast<std::size_t>(
      std::lower_bound(knots.begin(), knots.end(), value) - knots.begin());
  const auto hi = static_cast<std::size_t>(
      std::upper_bound(knots.begin(), knots.end(), value) - knots.begin());
  const double last = static_cast<double>(k - 1);
  if (lo != hi) {
    // value equals knots[lo..hi-1]
    return (static_cast<double>(lo + hi - 1) / 2.0) / last;
  }
  // knots[hi-1] < value < knots[hi]
  const std::size_t i = hi - 1;
  const double frac = (value - knots[i]) / (knots[i + 1] - knots[i]);
  return (static_cast<double>(i) + frac) / last;
}

double apply(const ColumnStats& stats, double value, NormMode mode) {
  if (is_missing(value)) return value;
  switch (mode) {
    case NormMode::kNone:
      return value;
    case NormMode::kStandard:
      if (stats.degenerate() || !(stats.stddev > 0.0)) return 0.0;
      return (value - stats.mean) / stats.stddev;
    case NormMode::kMinMax:
      if (stats.degenerate()) return 0.5;
      return std::clamp((value - stats.min) / (stats.max - stats.min), 0.0, 1.0);
    case NormMode::kQuantile:
      if (stats.degenerate()) return 0.5;
      return quantile_position(stats.quantile_knots, value);
  }
  return value;
}

std::string stats_to_json(std::span<const ColumnStats> stats) {
  json doc = json::array();
  for (const auto& s : stats) {
    doc.push_back({{"column", s.column},
                   {"mode", std::string(to_string(s.mode))},
                   {"quantile_knots", s.quantile_knots},
                   {"mean", s.mean},
                   {"stddev", s.stddev},
                   {"min", s.min},
                   {"max", s.max},
                   {"n_seen", s.n_seen},
                   {"degenerate", s.degenerate()}});
  }
  return doc.dump(2) + "\n";
}

std::vector<ColumnStats> stats_from_json(std::string_view text) {
  std::vector<ColumnStats> out;
  try {
    for (const auto& entry : json::parse(text)) {
      ColumnStats s;
      s.column = entry.at("column").get<std::string>();
      s.mode = parse_norm_mode(entry.at("mode").get<std::string>());
      s.quantile_knots = entry.at("quantile_knots").get<std::vector<double>>();
      s.mean = entry.at("mean").get<double>();
      s.stddev = entry.at("stddev").get<double>();
      s.min = entry.at("min").get<double>();
      s.max = entry.at("max").get<double>();
      s.n_seen = entry.at("n_seen").get<std::size_t>();
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("stats JSON: ") + e.what());
  }
  return out;
}

}  // namespace tabrag
