#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabrag/dataset.hpp"
#include "tabrag/predictors.hpp"
#include "tabrag/retrieval.hpp"

namespace tabrag {

enum class ToyShape { kCircle, kMoon, kLinearRotation };
std::string_view to_string(ToyShape shape);
ToyShape parse_toy_shape(std::string_view text);

struct ToySpec {
  ToyShape shape = ToyShape::kCircle;
  double noise = 0.1;  // in [0, 1]
  std::size_t n_train = 128;
  std::uint64_t seed = 0;
};

// Two numerical features (x1, x2) and a binary categorical label y with
// classes "0" and "1". Classes are balanced (class 0 takes the extra point
// for odd sizes) and class-0 rows come first.
//   circle: class 0 on radius 1, class 1 on radius 0.5, Gaussian noise
//     with stddev `noise` on each coordinate.
//   moon: class 0 on (cos t, sin t), class 1 on (1 - cos t, 0.5 - sin t),
//     t in [0, pi], same noise.
//   linear_rotation: blobs at offset +-1 along a seed-rotated axis; the
//     offset is jittered by `noise` but never changes sign.
Dataset generate_toy(const ToySpec& spec);

// Nested training subsets: prefixes of one seeded permutation of
// `train_rows`, each returned sorted. Sizes must be ascending and at most
// train_rows.size().
std::vector<std::vector<std::size_t>> generate_scaling_pools(std::span<const std::size_t> train_rows,
                                                             std::span<const std::size_t> sizes,
                                                             std::uint64_t seed);

// Predicts the class distribution of one grid point given its retrieved
// context.
using GridPredictor =
    std::function<std::vector<double>(const ContextPool&, const RetrievedContext&, const Query&)>;

struct NamedGridPredictor {
  std::string name;
  GridPredictor predict;
};

GridPredictor knn_grid_predictor();

struct BoundaryGrid {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  std::size_t resolution = 0;  // cells per axis
  std::string x_feature;
  std::string y_feature;
  std::vector<std::string> class_labels;
  std::vector<std::string> predictors;
  // probabilities[p][cell][class], cells row-major with y outer.
  std::vector<std::vector<std::vector<double>>> probabilities;

  double x_center(std::size_t i) const;
  double y_center(std::size_t j) const;
  std::size_t cell(std::size_t i, std::size_t j) const { return j * resolution + i; }
};

inline constexpr std::size_t kDefaultGridResolution = 100;

// Evaluates every predictor at each cell center of a resolution x
// resolution grid spanning the pool's bounding box widened by 10% of the
// range on each side (0.5 when a range is zero). The pool must have exactly
// two numerical features and a binary classification label.
BoundaryGrid boundary_grid(const ContextPool& pool, std::span<const NamedGridPredictor> predictors,
                           const RetrievalConfig& cfg,
                           std::size_t resolution = kDefaultGridResolution,
                           std::size_t threads = 1);
BoundaryGrid boundary_grid(const ContextPool& pool, const GridPredictor& predictor,
                           const RetrievalConfig& cfg,
                           std::size_t resolution = kDefaultGridResolution,
                           std::size_t threads = 1);

// Dense export for one predictor: header x,y,p_class1, one line per cell in
// row-major order.
std::string grid_to_csv(const BoundaryGrid& grid, std::size_t predictor = 0);
// Ranges, resolution, features, classes and predictor names.
std::string grid_header_json(const BoundaryGrid& grid);

}  // namespace tabrag
