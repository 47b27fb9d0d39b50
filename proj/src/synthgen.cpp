#include "tabrag/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "tabrag/error.hpp"
#include "tabrag/parallel.hpp"
#include "tabrag/random.hpp"
#include "tabrag/text.hpp"

namespace tabrag {

std::string_view to_string(ToyShape shape) {
  switch (shape) {
    case ToyShape::kCircle: return "circle";
    case ToyShape::kMoon: return "moon";
    case ToyShape::kLinearRotation: return "linear_rotation";
  }
  return "circle";
}

ToyShape parse_toy_shape(std::string_view text) {
  const std::string t = to_lower(trim(text));
  if (t == "circle") return ToyShape::kCircle;
  if (t == "moon") return ToyShape::kMoon;
  if (t == "linear_rotation") return ToyShape::kLinearRotation;
  throw InputError("unknown toy shape: " + std::string(text));
}

namespace {

struct Point {
  double x;
  double y;
};

// Evenly spaced angles: [0, 2pi) without the endpoint for the circle,
// [0, pi] with it for the moons.
std::vector<double> angles(std::size_t n, double span, bool endpoint) {
  std::vector<double> out(n);
  const double denom = endpoint ? static_cast<double>(n > 1 ? n - 1 : 1) : static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = span * static_cast<double>(i) / denom;
  return out;
}

}  // namespace

Dataset generate_toy(const ToySpec& spec) {
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) throw ContractError("toy noise must be in [0, 1]");
  if (spec.n_train < 2) throw ContractError("toy datasets need at least 2 points");

  const std::size_t n0 = (spec.n_train + 1) / 2;
  const std::size_t n1 = spec.n_train - n0;
  Rng rng(derive_seed(spec.seed, to_string(spec.shape)));
  std::vector<Point> class0;
  std::vector<Point> class1;
  const double pi = std::numbers::pi;

  switch (spec.shape) {
    case ToyShape::kCircle: {
      for (double t : angles(n0, 2.0 * pi, false)) class0.push_back({std::cos(t), std::sin(t)});
      for (double t : angles(n1, 2.0 * pi, false)) {
        class1.push_back({0.5 * std::cos(t), 0.5 * std::sin(t)});
      }
      break;
    }
    case ToyShape::kMoon: {
      for (double t : angles(n0, pi, true)) class0.push_back({std::cos(t), std::sin(t)});
      for (double t : angles(n1, pi, true)) {
        class1.push_back({1.0 - std::cos(t), 0.5 - std::sin(t)});
      }
      break;
    }
    case ToyShape::kLinearRotation: {
      const double theta = rng.uniform(0.0, pi);
      const Point normal{std::cos(theta), std::sin(theta)};
      const Point along{-normal.y, normal.x};
      const auto blob = [&](double side, std::size_t count, std::vector<Point>& out) {
        for (std::size_t i = 0; i < count; ++i) {
          const double offset = std::max(0.05, 1.0 + spec.noise * rng.normal());
          const double t = rng.normal();
          out.push_back({side * offset * normal.x + t * along.x,
                         side * offset * normal.y + t * along.y});
        }
      };
      blob(-1.0, n0, class0);
      blob(1.0, n1, class1);
      break;
    }
  }

  if (spec.shape != ToyShape::kLinearRotation && spec.noise > 0.0) {
    for (auto* group : {&class0, &class1}) {
      for (Point& p : *group) {
        p.x += spec.noise * rng.normal();
        p.y += spec.noise * rng.normal();
      }
    }
  }

  DatasetBuilder builder({{"x1", ColumnKind::kNumerical, ColumnRole::kFeature},
                          {"x2", ColumnKind::kNumerical, ColumnRole::kFeature},
                          {"y", ColumnKind::kCategorical, ColumnRole::kLabel}},
                         TaskKind::kClassification);
  for (const Point& p : class0) builder.add_row({p.x, p.y, std::string("0")});
  for (const Point& p : class1) builder.add_row({p.x, p.y, std::string("1")});
  return std::move(builder).build();
}

std::vector<std::vector<std::size_t>> generate_scaling_pools(std::span<const std::size_t> train_rows,
                                                             std::span<const std::size_t> sizes,
                                                             std::uint64_t seed) {
  std::size_t previous = 0;
  for (std::size_t s : sizes) {
    if (s == 0) throw ContractError("pool sizes must be positive");
    if (s < previous) throw ContractError("pool sizes must be ascending");
    if (s > train_rows.size()) {
      throw ContractError("pool size " + std::to_string(s) + " exceeds the " +
                          std::to_string(train_rows.size()) + " training rows");
    }
    previous = s;
  }
  const auto order = permutation(train_rows.size(), derive_seed(seed, "subset"));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s : sizes) {
    std::vector<std::size_t> subset;
    subset.reserve(s);
    for (std::size_t i = 0; i < s; ++i) subset.push_back(train_rows[order[i]]);
    std::sort(subset.begin(), subset.end());
    out.push_back(std::move(subset));
  }
  return out;
}

GridPredictor knn_grid_predictor() {
  return [](const ContextPool& pool, const RetrievedContext& ctx, const Query&) {
    return knn_predict(pool, ctx).class_probabilities;
  };
}

double BoundaryGrid::x_center(std::size_t i) const {
  return x_min + (static_cast<double>(i) + 0.5) * (x_max - x_min) / static_cast<double>(resolution);
}

double BoundaryGrid::y_center(std::size_t j) const {
  return y_min + (static_cast<double>(j) + 0.5) * (y_max - y_min) / static_cast<double>(resolution);
}

BoundaryGrid boundary_grid(const ContextPool& pool, std::span<const NamedGridPredictor> predictors,
                           const RetrievalConfig& cfg, std::size_t resolution,
                           std::size_t threads) {
  const auto& features = pool.features();
  if (features.size() != 2 || features[0].kind != ColumnKind::kNumerical ||
      features[1].kind != ColumnKind::kNumerical) {
    throw ContractError("boundary grids need exactly two numerical features");
  }
  const Dataset& data = pool.data();
  if (data.task() != TaskKind::kClassification || data.num_classes() != 2) {
    throw ContractError("boundary grids need a binary classification label");
  }
  if (resolution == 0) throw ContractError("grid resolution must be positive");
  if (pool.size() == 0) throw ContractError("boundary grid over an empty pool");

  BoundaryGrid grid;
  grid.resolution = resolution;
  grid.x_feature = features[0].name;
  grid.y_feature = features[1].name;
  grid.class_labels = data.class_labels();

  const auto bounds = [&](std::size_t f, double& lo, double& hi) {
    const auto& values = data.column(features[f].column).numbers;
    lo = INFINITY;
    hi = -INFINITY;
    for (std::size_t r : pool.rows()) {
      if (is_missing(values[r])) continue;
      lo = std::min(lo, values[r]);
      hi = std::max(hi, values[r]);
    }
    if (!std::isfinite(lo)) throw ContractError("feature " + features[f].name + " has no values");
    const double margin = hi > lo ? 0.1 * (hi - lo) : 0.5;
    lo -= margin;
    hi += margin;
  };
  bounds(0, grid.x_min, grid.x_max);
  bounds(1, grid.y_min, grid.y_max);

  const std::size_t cells = resolution * resolution;
  for (const auto& p : predictors) {
    grid.predictors.push_back(p.name);
    grid.probabilities.emplace_back(cells);
  }
  parallel_for(cells, threads, [&](std::size_t cell) {
    const std::size_t i = cell % resolution;
    const std::size_t j = cell / resolution;
    const Cell point[] = {grid.x_center(i), grid.y_center(j)};
    const Query query = pool.query_from_cells(point);
    const RetrievedContext ctx = retrieve(pool, query, cfg);
    for (std::size_t p = 0; p < predictors.size(); ++p) {
      auto probs = predictors[p].predict(pool, ctx, query);
      if (probs.size() != 2) throw ContractError("grid predictor must return two probabilities");
      grid.probabilities[p][cell] = std::move(probs);
    }
  });
  return grid;
}

BoundaryGrid boundary_grid(const ContextPool& pool, const GridPredictor& predictor,
                           const RetrievalConfig& cfg, std::size_t resolution,
                           std::size_t threads) {
  const NamedGridPredictor named[] = {{"predictor", predictor}};
  return boundary_grid(pool, named, cfg, resolution, threads);
}

std::string grid_to_csv(const BoundaryGrid& grid, std::size_t predictor) {
  if (predictor >= grid.probabilities.size()) throw ContractError("no such grid predictor");
  std::string out = "x,y,p_class1\n";
  for (std::size_t j = 0; j < grid.resolution; ++j) {
    for (std::size_t i = 0; i < grid.resolution; ++i) {
      out += format_number(grid.x_center(i));
      out += ',';
      out += format_number(grid.y_center(j));
      out += ',';
      out += format_number(grid.probabilities[predictor][grid.cell(i, j)][1]);
      out += '\n';
    }
  }
  return out;
}

std::string grid_header_json(const BoundaryGrid& grid) {
  nlohmann::ordered_json doc;
  doc["x_feature"] = grid.x_feature;
  doc["y_feature"] = grid.y_feature;
  doc["x_range"] = {grid.x_min, grid.x_max};
  doc["y_range"] = {grid.y_min, grid.y_max};
  doc["resolution"] = {grid.resolution, grid.resolution};
  doc["layout"] = "row-major, y outer, cell centers";
  doc["class_labels"] = grid.class_labels;
  doc["positive_class"] = grid.class_labels.size() > 1 ? grid.class_labels[1] : "";
  doc["predictors"] = grid.predictors;
  return doc.dump(2) + "\n";
}

}  // namespace tabrag
