#include "tabrag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "tabrag/error.hpp"
#include "tabrag/text.hpp"

namespace tabrag {

using nlohmann::json;

std::string_view to_string(MetricKind kind) {
  return kind == MetricKind::kAuroc ? "auroc" : "nmae";
}

MetricKind parse_metric_kind(std::string_view text) {
  if (text == "auroc") return MetricKind::kAuroc;
  if (text == "nmae") return MetricKind::kNmae;
  throw InputError("unknown metric: " + std::string(text));
}

std::optional<double> binary_auroc(std::span<const int> positive, std::span<const double> scores) {
  if (positive.size() != scores.size()) throw ContractError("auroc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]] != 0) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double p = static_cast<double>(n_pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n_neg));
}

std::optional<double> auroc(std::span<const std::size_t> labels,
                            std::span<const std::vector<double>> probabilities,
                            std::size_t num_classes) {
  if (labels.size() != probabilities.size()) throw ContractError("auroc: length mismatch");
  if (num_classes < 2) return std::nullopt;
  for (const auto& p : probabilities) {
    if (p.size() != num_classes) throw ContractError("auroc: probability vector has wrong length");
  }
  const auto one_vs_rest = [&](std::size_t cls) {
    std::vector<int> positive(labels.size());
    std::vector<double> scores(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      positive[i] = labels[i] == cls ? 1 : 0;
      scores[i] = probabilities[i][cls];
    }
    return binary_auroc(positive, scores);
  };
  if (num_classes == 2) return one_vs_rest(1);

  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (auto a = one_vs_rest(c)) {
      total += *a;
      ++counted;
    }
  }
  if (counted == 0) return std::nullopt;
  return total / static_cast<double>(counted);
}

std::optional<double> nmae(std::span<const double> labels, std::span<const double> estimates) {
  if (labels.size() != estimates.size()) throw ContractError("nmae: length mismatch");
  if (labels.empty()) return std::nullopt;
  double abs_error = 0.0;
  double label_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    abs_error += std::abs(estimates[i] - labels[i]);
    label_sum += labels[i];
  }
  const double n = static_cast<double>(labels.size());
  const double mean = label_sum / n;
  if (mean == 0.0) return std::nullopt;
  return (abs_error / n) / std::abs(mean);
}

std::vector<double> minmax_normalize(std::span<const double> values, Orientation orientation) {
  std::vector<double> out(values.size(), 1.0);
  if (values.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = (values[i] - lo) / (hi - lo);
    out[i] = orientation == Orientation::kHigherBetter ? t : 1.0 - t;
  }
  return out;
}

PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw ContractError("power-law fit needs at least two points");
  PowerLawFit fit;
  fit.points.assign(points.begin(), points.end());
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& [d, l] : points) {
    if (!(d > 0.0) || !(l > 0.0) || !std::isfinite(d) || !std::isfinite(l)) {
      throw ContractError("power-law fit needs positive finite points");
    }
    x.push_back(std::log(d));
    y.push_back(std::log(l));
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ContractError("power-law fit needs at least two distinct D values");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  fit.alpha = -slope;

  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (intercept + slope * x[i]);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;

  if (std::abs(fit.alpha) < 1e-9) {
    fit.d_c_defined = false;
    fit.d_c = std::nan("");
  } else {
    // log D_c = mean(log D) + mean(log L)/alpha, the centered form of intercept/alpha.
    fit.d_c = std::exp(mx + my / fit.alpha);
  }
  return fit;
}

std::string reports_to_json(std::span<const MetricReport> reports) {
  json doc = json::array();
  for (const auto& r : reports) {
    json entry = {{"dataset", r.dataset},
                  {"predictor", r.predictor},
                  {"policy", r.policy},
                  {"train_size", r.train_size},
                  {"context_size", r.context_size},
                  {"metric", std::string(to_string(r.metric))},
                  {"n_test", r.n_test}};
    entry["value"] = r.value ? json(*r.value) : json(nullptr);
    doc.push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

std::string reports_to_csv(std::span<const MetricReport> reports) {
  std::string out =
      csv_line({"dataset", "predictor", "policy", "train_size", "context_size", "metric", "value", "n_test"});
  for (const auto& r : reports) {
    out += csv_line({r.dataset, r.predictor, r.policy, std::to_string(r.train_size),
                     std::to_string(r.context_size), std::string(to_string(r.metric)),
                     r.value ? format_number(*r.value) : std::string(), std::to_string(r.n_test)});
  }
  return out;
}

std::vector<MetricReport> reports_from_json(std::string_view text) {
  std::vector<MetricReport> out;
  try {
    for (const auto& entry : json::parse(text)) {
      MetricReport r;
      r.dataset = entry.at("dataset").get<std::string>();
      r.predictor = entry.at("predictor").get<std::string>();
      r.policy = entry.value("policy", std::string());
      r.train_size = entry.value("train_size", std::size_t{0});
      r.context_size = entry.value("context_size", std::size_t{0});
      r.metric = parse_metric_kind(entry.at("metric").get<std::string>());
      r.n_test = entry.value("n_test", std::size_t{0});
      if (!entry.at("value").is_null()) r.value = entry.at("value").get<double>();
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("metrics JSON: ") + e.what());
  }
  return out;
}

std::string fit_to_json(const PowerLawFit& fit) {
  json doc;
  doc["alpha"] = fit.alpha;
  doc["d_c"] = fit.d_c_defined ? json(fit.d_c) : json(nullptr);
  doc["d_c_defined"] = fit.d_c_defined;
  doc["r_squared"] = fit.r_squared;
  json pts = json::array();
  for (const auto& [d, l] : fit.points) pts.push_back({d, l});
  doc["points"] = pts;
  return doc.dump(2) + "\n";
}

}  // namespace tabrag
