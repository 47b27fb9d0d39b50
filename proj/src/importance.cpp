#include "tabrag/importance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "tabrag/error.hpp"
#include "tabrag/parallel.hpp"
#include "tabrag/random.hpp"

namespace tabrag {

using nlohmann::json;

std::size_t FeatureWeights::index_of(std::string_view feature) const {
  const auto it = std::find(features.begin(), features.end(), feature);
  if (it == features.end()) throw ContractError("unknown feature: " + std::string(feature));
  return static_cast<std::size_t>(it - features.begin());
}

std::string_view to_string(ImportanceMode mode) {
  switch (mode) {
    case ImportanceMode::kDual:
      return "dual";
    case ImportanceMode::kPearsonOnly:
      return "pearson_only";
    case ImportanceMode::kPpsOnly:
      return "pps_only";
    case ImportanceMode::kUniform:
      return "uniform";
  }
  return "dual";
}

ImportanceMode parse_importance_mode(std::string_view text) {
  if (text == "dual") return ImportanceMode::kDual;
  if (text == "pearson_only") return ImportanceMode::kPearsonOnly;
  if (text == "pps_only") return ImportanceMode::kPpsOnly;
  if (text == "uniform") return ImportanceMode::kUniform;
  throw ContractError("unknown importance mode: " + std::string(text));
}

// ---------------------------------------------------------------------------
// Pearson

namespace {

double clamp_weight(double r) {
  if (!std::isfinite(r)) return 0.0;
  return std::clamp(std::abs(r), 0.0, 1.0);
}

// Centered sums of a numeric vector.
struct Moments {
  double mean = 0.0;
  double sxx = 0.0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.sxx += (x - m.mean) * (x - m.mean);
  return m;
}

// Largest |r| between a numeric vector and the indicators of `codes`
// (values in [0, levels)).
double max_abs_r_numeric_vs_indicators(std::span<const double> values,
                                       std::span<const std::int32_t> codes, std::size_t levels) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const Moments m = moments(values);
  if (!(m.sxx > 0.0)) return 0.0;
  std::vector<double> centered_sum(levels, 0.0);
  std::vector<std::size_t> count(levels, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(codes[i]);
    centered_sum[c] += values[i] - m.mean;
    ++count[c];
  }
  double best = 0.0;
  for (std::size_t c = 0; c < levels; ++c) {
    if (count[c] == 0 || count[c] == n) continue;
    const double na = static_cast<double>(count[c]);
    const double s_ind = na * (static_cast<double>(n) - na) / static_cast<double>(n);
    best = std::max(best, clamp_weight(centered_sum[c] / std::sqrt(s_ind * m.sxx)));
  }
  return best;
}

// Largest |r| over indicator pairs of two code vectors, from the
// contingency table.
double max_abs_r_indicators(std::span<const std::int32_t> a, std::size_t levels_a,
                            std::span<const std::int32_t> b, std::size_t levels_b) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  std::vector<double> table(levels_a * levels_b, 0.0);
  std::vector<double> count_a(levels_a, 0.0);
  std::vector<double> count_b(levels_b, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ca = static_cast<std::size_t>(a[i]);
    const auto cb = static_cast<std::size_t>(b[i]);
    table[ca * levels_b + cb] += 1.0;
    count_a[ca] += 1.0;
    count_b[cb] += 1.0;
  }
  const double dn = static_cast<double>(n);
  double best = 0.0;
  for (std::size_t i = 0; i < levels_a; ++i) {
    if (count_a[i] == 0.0 || count_a[i] == dn) continue;
    for (std::size_t j = 0; j < levels_b; ++j) {
      if (count_b[j] == 0.0 || count_b[j] == dn) continue;
      const double num = dn * table[i * levels_b + j] - count_a[i] * count_b[j];
      const double den =
          std::sqrt(count_a[i] * (dn - count_a[i]) * count_b[j] * (dn - count_b[j]));
      best = std::max(best, clamp_weight(num / den));
    }
  }
  return best;
}

}  // namespace

double abs_pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("abs_pearson: length mismatch");
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (is_missing(x[i]) || is_missing(y[i])) continue;
    xs.push_back(x[i]);
    ys.push_back(y[i]);
  }
  if (xs.size() < 2) return 0.0;
  const Moments mx = moments(xs);
  const Moments my = moments(ys);
  if (!(mx.sxx > 0.0) || !(my.sxx > 0.0)) return 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx.mean) * (ys[i] - my.mean);
  return clamp_weight(sxy / std::sqrt(mx.sxx * my.sxx));
}

std::vector<double> pearson_importance(const Dataset& data, std::span<const std::size_t> rows) {
  const Column& label = data.column(data.label_column());
  const bool classification = data.task() == TaskKind::kClassification;
  const std::size_t num_classes = classification ? data.num_classes() : 0;

  std::vector<double> out;
  for (std::size_t col : data.feature_columns()) {
    const Column& feature = data.column(col);
    double weight = 0.0;
    if (feature.kind == ColumnKind::kNumerical) {
      std::vector<double> x;
      std::vector<double> y;
      std::vector<std::int32_t> classes;
      for (std::size_t r : rows) {
        if (is_missing(feature.numbers[r])) continue;
        x.push_back(feature.numbers[r]);
        if (classification) {
          classes.push_back(label.codes[r]);
        } else {
          y.push_back(label.numbers[r]);
        }
      }
      weight = classification ? max_abs_r_numeric_vs_indicators(x, classes, num_classes)
                              : abs_pearson(x, y);
    } else {
      std::vector<std::int32_t> codes;
      codes.reserve(rows.size());
      for (std::size_t r : rows) codes.push_back(feature.codes[r]);
      if (classification) {
        std::vector<std::int32_t> classes;
        classes.reserve(rows.size());
        for (std::size_t r : rows) classes.push_back(label.codes[r]);
        weight = max_abs_r_indicators(codes, feature.categories.size(), classes, num_classes);
      } else {
        std::vector<double> y;
        y.reserve(rows.size());
        for (std::size_t r : rows) y.push_back(label.numbers[r]);
        weight = max_abs_r_numeric_vs_indicators(y, codes, feature.categories.size());
      }
    }
    out.push_back(weight);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predictive power score

std::size_t PpsOptions::quantile_steps() const {
  if (!(quantile_step > 0.0) || quantile_step >= 1.0) {
    throw ContractError("quantile_step must lie in (0, 1)");
  }
  const double steps = 1.0 / quantile_step;
  const auto rounded = static_cast<std::size_t>(std::llround(steps));
  if (std::abs(steps - static_cast<double>(rounded)) > 1e-6) {
    throw ContractError("1/quantile_step must be a whole number");
  }
  return rounded;
}

std::vector<std::size_t> kfold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ContractError("cv_folds must be at least 2");
  const auto order = permutation(n, seed);
  std::vector<std::size_t> fold_of(n, 0);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t size = n / folds + (f < n % folds ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fold_of[order[pos++]] = f;
  }
  return fold_of;
}

std::vector<double> quantile_candidates(std::span<const double> values, std::size_t steps) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  if (sorted.empty()) return out;
  const std::size_t last = sorted.size() - 1;
  for (std::size_t k = 1; k < steps; ++k) {
    out.push_back(sorted[k * last / steps]);
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

// Greedy single-feature tree over integer split keys. For numerical
// features the key is the candidate-threshold bin (key <= j means
// x <= candidate[j]); for categorical features it is the category code and
// splits are one-vs-rest.
class KeyTree {
 public:
  KeyTree(bool categorical, TaskKind task, std::size_t num_classes, int max_depth)
      : categorical_(categorical), task_(task), num_classes_(num_classes), max_depth_(max_depth) {}

  void fit(std::span<const std::int64_t> keys, std::span<const double> y) {
    nodes_.clear();
    keys_ = keys;
    y_ = y;
    // Centering keeps the sum-of-squares formula well conditioned.
    offset_ = 0.0;
    if (task_ == TaskKind::kRegression && !y.empty()) {
      offset_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    }
    std::vector<std::size_t> samples(keys.size());
    std::iota(samples.begin(), samples.end(), std::size_t{0});
    build(samples, 0);
  }

  double predict(std::int64_t key) const {
    std::size_t node = 0;
    while (!nodes_[node].leaf) {
      const Node& n = nodes_[node];
      const bool left = categorical_ ? key == n.split_key : key <= n.split_key;
      node = left ? n.left : n.right;
    }
    return nodes_[node].value;
  }

 private:
  struct Node {
    bool leaf = true;
    std::int64_t split_key = 0;
    std::size_t left = 0;
    std::size_t right = 0;
    double value = 0.0;
  };

  // Sufficient statistics of a group of samples.
  struct Stats {
    double count = 0.0;
    double sum = 0.0;
    double sumsq = 0.0;
    std::vector<double> class_counts;

    void add(const Stats& o) {
      count += o.count;
      sum += o.sum;
      sumsq += o.sumsq;
      for (std::size_t c = 0; c < o.class_counts.size(); ++c) class_counts[c] += o.class_counts[c];
    }
  };

  Stats empty_stats() const {
    Stats s;
    if (task_ == TaskKind::kClassification) s.class_counts.assign(num_classes_, 0.0);
    return s;
  }

  // Sum of squared errors around the mean, or count-weighted Gini impurity.
  double loss(const Stats& s) const {
    if (s.count == 0.0) return 0.0;
    if (task_ == TaskKind::kRegression) {
      return std::max(0.0, s.sumsq - s.sum * s.sum / s.count);
    }
    double sq = 0.0;
    for (double c : s.class_counts) sq += c * c;
    return s.count - sq / s.count;
  }

  double leaf_value(const Stats& s) const {
    if (task_ == TaskKind::kRegression) return s.sum / s.count + offset_;
    std::size_t best = 0;
    for (std::size_t c = 1; c < s.class_counts.size(); ++c) {
      if (s.class_counts[c] > s.class_counts[best]) best = c;
    }
    return static_cast<double>(best);
  }

  std::size_t build(const std::vector<std::size_t>& samples, int depth) {
    // Per-key statistics, ascending by key.
    std::map<std::int64_t, Stats> by_key;
    Stats total = empty_stats();
    for (std::size_t i : samples) {
      auto [it, inserted] = by_key.try_emplace(keys_[i], empty_stats());
      Stats& s = it->second;
      s.count += 1.0;
      if (task_ == TaskKind::kRegression) {
        const double v = y_[i] - offset_;
        s.sum += v;
        s.sumsq += v * v;
      } else {
        s.class_counts[static_cast<std::size_t>(y_[i])] += 1.0;
      }
    }
    for (const auto& [key, s] : by_key) total.add(s);

    const std::size_t index = nodes_.size();
    nodes_.push_back(Node{});
    nodes_[index].value = leaf_value(total);

    const double node_loss = loss(total);
    const double eps = 1e-10 * (1.0 + node_loss);
    if (depth >= max_depth_ || samples.size() < 2 || by_key.size() < 2 || node_loss <= eps) {
      return index;
    }

    bool found = false;
    double best_loss = 0.0;
    std::int64_t best_key = 0;
    if (categorical_) {
      for (const auto& [key, s] : by_key) {
        Stats rest = empty_stats();
        for (const auto& [other, o] : by_key) {
          if (other != key) rest.add(o);
        }
        const double l = loss(s) + loss(rest);
        if (!found || l < best_loss - 1e-10 * (1.0 + std::abs(best_loss))) {
          found = true;
          best_loss = l;
          best_key = key;
        }
      }
    } else {
      Stats left = empty_stats();
      auto last = std::prev(by_key.end());
      for (auto it = by_key.begin(); it != last; ++it) {
        left.add(it->second);
        Stats right = empty_stats();
        for (auto jt = std::next(it); jt != by_key.end(); ++jt) right.add(jt->second);
        const double l = loss(left) + loss(right);
        if (!found || l < best_loss - 1e-10 * (1.0 + std::abs(best_loss))) {
          found = true;
          best_loss = l;
          best_key = it->first;
        }
      }
    }
    if (!found || !(best_loss < node_loss - eps)) return index;

    std::vector<std::size_t> left_samples;
    std::vector<std::size_t> right_samples;
    for (std::size_t i : samples) {
      const bool left = categorical_ ? keys_[i] == best_key : keys_[i] <= best_key;
      (left ? left_samples : right_samples).push_back(i);
    }
    nodes_[index].leaf = false;
    nodes_[index].split_key = best_key;
    const std::size_t l = build(left_samples, depth + 1);
    const std::size_t r = build(right_samples, depth + 1);
    nodes_[index].left = l;
    nodes_[index].right = r;
    return index;
  }

  bool categorical_;
  TaskKind task_;
  std::size_t num_classes_;
  int max_depth_;
  std::span<const std::int64_t> keys_;
  std::span<const double> y_;
  double offset_ = 0.0;
  std::vector<Node> nodes_;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_abs_error(std::span<const double> truth, std::span<const double> pred) {
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) total += std::abs(truth[i] - pred[i]);
  return total / static_cast<double>(truth.size());
}

// Support-weighted mean of per-class F1 over classes present in truth.
double weighted_f1(std::span<const double> truth, std::span<const double> pred,
                   std::size_t num_classes) {
  std::vector<double> tp(num_classes, 0.0);
  std::vector<double> fp(num_classes, 0.0);
  std::vector<double> fn(num_classes, 0.0);
  std::vector<double> support(num_classes, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(pred[i]);
    support[t] += 1.0;
    if (t == p) {
      tp[t] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[t] += 1.0;
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (support[c] == 0.0) continue;
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    const double f1 = denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
    total += support[c] * f1;
  }
  return total / static_cast<double>(truth.size());
}

std::vector<std::int64_t> numeric_keys(std::span<const double> x, std::span<const double> cands) {
  std::vector<std::int64_t> keys(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    keys[i] = std::lower_bound(cands.begin(), cands.end(), x[i]) - cands.begin();
  }
  return keys;
}

}  // namespace

double pps_score(const SingleFeatureProblem& problem, const PpsOptions& options) {
  if (problem.x.size() != problem.y.size()) throw ContractError("pps_score: length mismatch");
  const std::size_t steps = options.quantile_steps();
  const std::size_t folds = options.cv_folds;
  if (folds < 2) throw ContractError("cv_folds must be at least 2");

  // Drop missing feature values, then subsample large inputs.
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < problem.x.size(); ++i) {
    if (!is_missing(problem.x[i])) keep.push_back(i);
  }
  if (keep.size() > options.sample_cap) {
    keep = sample_without_replacement(std::move(keep), options.sample_cap,
                                      derive_seed(options.seed, "pps-sample"));
  }
  const std::size_t n = keep.size();
  if (n < folds) return 0.0;
  std::vector<double> x(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = problem.x[keep[i]];
    y[i] = problem.y[keep[i]];
  }

  const bool regression = problem.task == TaskKind::kRegression;
  const std::size_t num_classes = problem.num_classes;
  if (!regression) {
    for (double c : y) {
      if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
        throw ContractError("pps_score: class index out of range");
      }
    }
  }

  // Naive baselines over all samples.
  double naive = 0.0;
  if (regression) {
    const std::vector<double> pred(n, median(y));
    naive = mean_abs_error(y, pred);
    if (!(naive > 0.0)) return 0.0;
  } else {
    std::vector<double> counts(num_classes, 0.0);
    for (double c : y) counts[static_cast<std::size_t>(c)] += 1.0;
    const auto mode = std::max_element(counts.begin(), counts.end()) - counts.begin();
    const std::vector<double> pred(n, static_cast<double>(mode));
    naive = weighted_f1(y, pred, num_classes);
    if (naive >= 1.0) return 0.0;
  }

  const auto fold_of = kfold_assignment(n, folds, derive_seed(options.seed, "pps-folds"));
  double metric_sum = 0.0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<double> train_x, train_y, test_x, test_y;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == f) {
        test_x.push_back(x[i]);
        test_y.push_back(y[i]);
      } else {
        train_x.push_back(x[i]);
        train_y.push_back(y[i]);
      }
    }
    std::vector<std::int64_t> train_keys;
    std::vector<std::int64_t> test_keys;
    if (problem.categorical) {
      for (double v : train_x) train_keys.push_back(static_cast<std::int64_t>(v));
      for (double v : test_x) test_keys.push_back(static_cast<std::int64_t>(v));
    } else {
      const auto cands = quantile_candidates(train_x, steps);
      train_keys = numeric_keys(train_x, cands);
      test_keys = numeric_keys(test_x, cands);
    }
    KeyTree tree(problem.categorical, problem.task, num_classes, options.max_depth);
    tree.fit(train_keys, train_y);
    std::vector<double> pred(test_keys.size());
    for (std::size_t i = 0; i < test_keys.size(); ++i) pred[i] = tree.predict(test_keys[i]);
    metric_sum += regression ? mean_abs_error(test_y, pred) : weighted_f1(test_y, pred, num_classes);
  }
  const double metric = metric_sum / static_cast<double>(folds);

  const double score = regression ? 1.0 - metric / naive : (metric - naive) / (1.0 - naive);
  return std::clamp(score, 0.0, 1.0);
}

std::vector<double> pps_importance(const Dataset& data, std::span<const std::size_t> rows,
                                   const PpsOptions& options) {
  const auto& features = data.feature_columns();
  const Column& label = data.column(data.label_column());
  const bool classification = data.task() == TaskKind::kClassification;

  std::vector<double> out(features.size(), 0.0);
  parallel_for(features.size(), options.threads, [&](std::size_t f) {
    const Column& feature = data.column(features[f]);
    SingleFeatureProblem problem;
    problem.categorical = feature.kind == ColumnKind::kCategorical;
    problem.task = data.task();
    problem.num_classes = classification ? data.num_classes() : 0;
    problem.x.reserve(rows.size());
    problem.y.reserve(rows.size());
    for (std::size_t r : rows) {
      problem.x.push_back(problem.categorical ? static_cast<double>(feature.codes[r])
                                              : feature.numbers[r]);
      problem.y.push_back(classification ? static_cast<double>(label.codes[r])
                                         : label.numbers[r]);
    }
    out[f] = pps_score(problem, options);
  });
  return out;
}

FeatureWeights compute_feature_weights(const Dataset& data, std::span<const std::size_t> rows,
                                       const PpsOptions& options) {
  if (rows.empty()) throw ContractError("feature weights need at least one training row");
  FeatureWeights w;
  for (std::size_t col : data.feature_columns()) w.features.push_back(data.schema()[col].name);
  w.pearson = pearson_importance(data, rows);
  w.pps = pps_importance(data, rows, options);
  return w;
}

RankingWeights combine(const FeatureWeights& weights, ImportanceMode mode) {
  switch (mode) {
    case ImportanceMode::kDual:
      return {weights.pearson, weights.pps};
    case ImportanceMode::kPearsonOnly:
      return {weights.pearson, std::nullopt};
    case ImportanceMode::kPpsOnly:
      return {weights.pps, std::nullopt};
    case ImportanceMode::kUniform:
      return {std::vector<double>(weights.size(), 1.0), std::nullopt};
  }
  throw ContractError("unknown importance mode");
}

std::string weights_to_json(const FeatureWeights& weights) {
  json doc = json::object();
  json pearson = json::object();
  json pps = json::object();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    pearson[weights.features[i]] = weights.pearson[i];
    pps[weights.features[i]] = weights.pps[i];
  }
  doc["features"] = weights.features;
  doc["pearson"] = pearson;
  doc["pps"] = pps;
  return doc.dump(2) + "\n";
}

FeatureWeights weights_from_json(std::string_view text) {
  FeatureWeights w;
  try {
    const json doc = json::parse(text);
    w.features = doc.at("features").get<std::vector<std::string>>();
    for (const auto& name : w.features) {
      w.pearson.push_back(doc.at("pearson").at(name).get<double>());
      w.pps.push_back(doc.at("pps").at(name).get<double>());
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("weights JSON: ") + e.what());
  }
  return w;
}

}  // namespace tabrag
