#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabrag/dataset.hpp"

namespace tabrag {

enum class NormMode { kQuantile, kStandard, kMinMax, kNone };

std::string_view to_string(NormMode mode);
NormMode parse_norm_mode(std::string_view text);

// Maximum number of quantile knots kept per column; larger pools keep
// evenly spaced order statistics.
inline constexpr std::size_t kMaxQuantileKnots = 1000;

// Per-column statistics fitted on training rows only. Every statistic is
// filled regardless of `mode`; `mode` is the default used by apply().
struct ColumnStats {
  std::string column;
  NormMode mode = NormMode::kQuantile;
  std::vector<double> quantile_knots;  // sorted ascending
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  double min = 0.0;
  double max = 0.0;
  std::size_t n_seen = 0;

  // No non-missing values, or all of them equal.
  bool degenerate() const { return n_seen == 0 || !(max > min); }
};

// Fits stats for one numerical column over `rows`. Missing cells are skipped.
ColumnStats fit_column_stats(const Dataset& data, std::size_t column,
                             std::span<const std::size_t> rows, NormMode mode);

ColumnStats fit_column_stats(std::string name, std::span<const double> values, NormMode mode);

// Stats for every numerical feature column, in feature order. `modes` is
// either empty (quantile everywhere) or one entry per numerical feature.
std::vector<ColumnStats> fit_stats(const Dataset& data, std::span<const std::size_t> train_rows,
                                   std::span<const NormMode> modes = {});

// Normalized value under `mode`. Quantile and min-max outputs lie in [0,1];
// degenerate stats give 0.5 for those modes and 0 for standard. NaN input
// returns NaN so that callers can treat it as missing.
double apply(const ColumnStats& stats, double value, NormMode mode);
inline double apply(const ColumnStats& stats, double value) {
  return apply(stats, value, stats.mode);
}

// Interpolated empirical CDF over sorted knots: knot i maps to i/(k-1),
// runs of equal knots map to their mid position, values between knots are
// interpolated linearly, and values outside the knot range clamp to 0 or 1.
double quantile_position(std::span<const double> knots, double value);

std::string stats_to_json(std::span<const ColumnStats> stats);
std::vector<ColumnStats> stats_from_json(std::string_view text);

}  // namespace tabrag
