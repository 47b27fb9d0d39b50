#include <doctest.h>

#include <algorithm>
#include <json.hpp>
#include <memory>

#include "../oracles.hpp"
#include "helpers.hpp"
#include "tabrag/error.hpp"
#include "tabrag/metrics.hpp"
#include "tabrag/predictors.hpp"
#include "tabrag/synthgen.hpp"

using namespace tabrag;

namespace {

double radius(const Dataset& d, std::size_t r) {
  return std::hypot(d.column(0).numbers[r], d.column(1).numbers[r]);
}

RetrievalConfig nearest_neighbour_config(std::size_t quota) {
  RetrievalConfig cfg;
  cfg.quota = quota;
  cfg.numeric_norm = NormMode::kNone;
  cfg.distance_minmax_rescale = false;
  cfg.importance_mode = ImportanceMode::kUniform;
  return cfg;
}

ContextPool raw_pool(Dataset d) {
  PoolOptions opts;
  opts.numeric_norm = NormMode::kNone;
  const auto n = d.num_rows();
  return ContextPool::build(std::make_shared<const Dataset>(std::move(d)), testing::iota_rows(n), opts);
}

}  // namespace

TEST_CASE("noiseless circle radii") {
  const Dataset d = generate_toy({ToyShape::kCircle, 0.0, 64, 1});
  for (std::size_t r = 0; r < d.num_rows(); ++r) {
    const double want = d.label_class(r) == 0 ? 1.0 : 0.5;
    CHECK(std::abs(radius(d, r) - want) <= 1e-12);
  }
}

TEST_CASE("toy generation is deterministic and balanced") {
  for (ToyShape shape : {ToyShape::kCircle, ToyShape::kMoon, ToyShape::kLinearRotation}) {
    const ToySpec spec{shape, 0.2, 16, 3};
    const Dataset a = generate_toy(spec);
    CHECK(a == generate_toy(spec));
    std::size_t ones = 0;
    for (std::size_t r = 0; r < a.num_rows(); ++r) {
      ones += a.label_class(r);
      CHECK(std::isfinite(a.column(0).numbers[r]));
      CHECK(std::isfinite(a.column(1).numbers[r]));
    }
    CHECK(a.num_rows() == 16);
    CHECK(ones == 8);
    CHECK(a.class_labels() == std::vector<std::string>{"0", "1"});
  }
  CHECK(parse_toy_shape("linear_rotation") == ToyShape::kLinearRotation);
  CHECK_THROWS_AS(parse_toy_shape("spiral"), InputError);
  CHECK_THROWS_AS(generate_toy({ToyShape::kCircle, 1.5, 16, 0}), ContractError);
  CHECK_THROWS_AS(generate_toy({ToyShape::kCircle, 0.1, 1, 0}), ContractError);
}

TEST_CASE("linear rotation classes sit on opposite sides of a line") {
  const Dataset d = generate_toy({ToyShape::kLinearRotation, 0.3, 200, 9});
  // Fit the separating direction from the class means and check every point.
  double m0x = 0, m0y = 0, m1x = 0, m1y = 0;
  for (std::size_t r = 0; r < 100; ++r) {
    m0x += d.column(0).numbers[r];
    m0y += d.column(1).numbers[r];
    m1x += d.column(0).numbers[r + 100];
    m1y += d.column(1).numbers[r + 100];
  }
  const double nx = m1x - m0x;
  const double ny = m1y - m0y;
  for (std::size_t r = 0; r < 200; ++r) {
    const double side = d.column(0).numbers[r] * nx + d.column(1).numbers[r] * ny;
    CHECK((d.label_class(r) == 1 ? side > 0 : side < 0));
  }
}

TEST_CASE("noiseless toy sets are separated by 3-NN") {
  for (ToyShape shape : {ToyShape::kCircle, ToyShape::kMoon}) {
    const Dataset train = generate_toy({shape, 0.0, 200, 0});
    const Dataset test = generate_toy({shape, 0.0, 61, 0});
    // One pool over train rows; test points are queried by value.
    const auto pool = raw_pool(train);
    const auto cfg = nearest_neighbour_config(3);
    std::vector<std::size_t> labels;
    std::vector<std::vector<double>> probs;
    for (std::size_t r = 0; r < test.num_rows(); ++r) {
      const Cell cells[] = {test.column(0).numbers[r], test.column(1).numbers[r]};
      const auto q = pool.query_from_cells(cells);
      probs.push_back(knn_predict(pool, retrieve(pool, q, cfg)).class_probabilities);
      labels.push_back(test.label_class(r));
    }
    CHECK(auroc(labels, probs, 2).value() == 1.0);
  }
}

TEST_CASE("scaling pools are nested and deterministic") {
  const auto rows = testing::iota_rows(100);
  const std::size_t sizes[] = {16, 64, 100};
  const auto pools = generate_scaling_pools(rows, sizes, 4);
  CHECK(pools == generate_scaling_pools(rows, sizes, 4));
  CHECK(pools[0].size() == 16);
  CHECK(std::includes(pools[1].begin(), pools[1].end(), pools[0].begin(), pools[0].end()));
  CHECK(pools[2] == rows);
  const std::size_t too_big[] = {101};
  CHECK_THROWS_AS(generate_scaling_pools(rows, too_big, 0), ContractError);
  const std::size_t descending[] = {50, 10};
  CHECK_THROWS_AS(generate_scaling_pools(rows, descending, 0), ContractError);
}

TEST_CASE("3x3 grid over three points is the Voronoi partition") {
  DatasetBuilder b({{"x1", ColumnKind::kNumerical, ColumnRole::kFeature},
                    {"x2", ColumnKind::kNumerical, ColumnRole::kFeature},
                    {"y", ColumnKind::kCategorical, ColumnRole::kLabel}},
                   TaskKind::kClassification);
  b.add_row({0.0, 0.0, std::string("0")});
  b.add_row({1.0, 1.0, std::string("1")});
  b.add_row({0.9, 0.1, std::string("0")});
  const auto pool = raw_pool(std::move(b).build());
  const auto grid = boundary_grid(pool, knn_grid_predictor(), nearest_neighbour_config(1), 3);
  CHECK(grid.x_min == doctest::Approx(-0.1));
  CHECK(grid.x_max == doctest::Approx(1.1));
  CHECK(grid.y_min == doctest::Approx(-0.1));
  const std::vector<std::pair<double, double>> pts{{0, 0}, {1, 1}, {0.9, 0.1}};
  const int cls[] = {0, 1, 0};
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < 3; ++i) {
      const auto nn = oracle::nearest(pts, grid.x_center(i), grid.y_center(j));
      CHECK(grid.probabilities[0][grid.cell(i, j)][1] == static_cast<double>(cls[nn]));
    }
  }
}

TEST_CASE("constant predictor gives a uniform grid and exports") {
  const Dataset d = generate_toy({ToyShape::kMoon, 0.1, 20, 1});
  const auto pool = raw_pool(d);
  const NamedGridPredictor constant{"flat", [](const ContextPool&, const RetrievedContext&, const Query&) {
                                      return std::vector<double>{0.5, 0.5};
                                    }};
  const NamedGridPredictor both[] = {constant, {"knn", knn_grid_predictor()}};
  const auto grid = boundary_grid(pool, both, nearest_neighbour_config(3), 5, 2);
  for (const auto& cell : grid.probabilities[0]) CHECK(cell == std::vector<double>{0.5, 0.5});
  const std::string csv = grid_to_csv(grid, 0);
  CHECK(csv.rfind("x,y,p_class1\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 26);
  const auto header = nlohmann::json::parse(grid_header_json(grid));
  CHECK(header["resolution"] == nlohmann::json({5, 5}));
  CHECK(header["predictors"] == nlohmann::json({"flat", "knn"}));
}

TEST_CASE("grid bounds and preconditions") {
  const Dataset d = generate_toy({ToyShape::kCircle, 0.1, 30, 2});
  const auto pool = raw_pool(d);
  const auto grid = boundary_grid(pool, knn_grid_predictor(), nearest_neighbour_config(1), 4);
  double lo = INFINITY;
  double hi = -INFINITY;
  for (double v : d.column(0).numbers) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(grid.x_min == doctest::Approx(lo - 0.1 * (hi - lo)));
  CHECK(grid.x_max == doctest::Approx(hi + 0.1 * (hi - lo)));

  const auto three = ContextPool::build(std::make_shared<const Dataset>(testing::random_mixed(1, 30, 3, true)),
                                        testing::iota_rows(30));
  CHECK_THROWS_AS(boundary_grid(three, knn_grid_predictor(), {}, 4), ContractError);
}
