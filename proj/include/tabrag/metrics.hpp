#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tabrag {

enum class MetricKind { kAuroc, kNmae };
std::string_view to_string(MetricKind kind);
MetricKind parse_metric_kind(std::string_view text);

struct MetricReport {
  std::string dataset;
  std::string predictor;
  MetricKind metric = MetricKind::kAuroc;
  std::optional<double> value;  // nullopt when the metric is undefined
  std::size_t n_test = 0;
  // Sweep coordinates for harness runs.
  std::size_t train_size = 0;
  std::size_t context_size = 0;
  std::string policy;
};

// Mann-Whitney AUROC for binary labels (nonzero = positive); tied scores
// count one half. nullopt unless both classes are present.
std::optional<double> binary_auroc(std::span<const int> positive, std::span<const double> scores);

// Binary: AUROC of class 1's probability. Multi-class: unweighted mean of
// one-vs-rest AUROCs over classes present in the labels (classes that are
// the only one present are skipped). probabilities[i][c] is row i's score
// for class c.
std::optional<double> auroc(std::span<const std::size_t> labels,
                            std::span<const std::vector<double>> probabilities,
                            std::size_t num_classes);

// mean(|estimate - label|) / |mean(label)|; nullopt when the label mean is 0
// or the input is empty.
std::optional<double> nmae(std::span<const double> labels, std::span<const double> estimates);

enum class Orientation { kHigherBetter, kLowerBetter };

// (v - min)/(max - min), flipped for lower-is-better so 1 is always best;
// an all-equal group maps to all ones.
std::vector<double> minmax_normalize(std::span<const double> values, Orientation orientation);

struct PowerLawFit {
  double d_c = 0.0;
  double alpha = 0.0;
  double r_squared = 0.0;
  bool d_c_defined = true;  // false when |alpha| < 1e-9
  std::vector<std::pair<double, double>> points;
};

// Least squares on log L = alpha*log D_c - alpha*log D, for L(D) = (D_c/D)^alpha.
PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points);

std::string reports_to_json(std::span<const MetricReport> reports);
std::string reports_to_csv(std::span<const MetricReport> reports);
std::vector<MetricReport> reports_from_json(std::string_view text);
std::string fit_to_json(const PowerLawFit& fit);

}  // namespace tabrag
