#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "tabrag/dataset.hpp"
#include "tabrag/random.hpp"
#include "tabrag/text.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tabrag-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

// One numerical feature "x" and a numerical regression label "y".
inline tabrag::Dataset regression_1d(const std::vector<double>& x, const std::vector<double>& y) {
  using namespace tabrag;
  DatasetBuilder b({{"x", ColumnKind::kNumerical, ColumnRole::kFeature},
                    {"y", ColumnKind::kNumerical, ColumnRole::kLabel}},
                   TaskKind::kRegression);
  for (std::size_t i = 0; i < x.size(); ++i) b.add_row({x[i], y[i]});
  return std::move(b).build();
}

// One numerical feature "x" and a categorical class label "y".
inline tabrag::Dataset classification_1d(const std::vector<double>& x,
                                         const std::vector<std::string>& y) {
  using namespace tabrag;
  DatasetBuilder b({{"x", ColumnKind::kNumerical, ColumnRole::kFeature},
                    {"y", ColumnKind::kCategorical, ColumnRole::kLabel}},
                   TaskKind::kClassification);
  for (std::size_t i = 0; i < x.size(); ++i) b.add_row({x[i], y[i]});
  return std::move(b).build();
}

// Random mixed-type table: numerical and categorical features with some
// missing cells, a classification or regression label.
inline tabrag::Dataset random_mixed(std::uint64_t seed, std::size_t rows, std::size_t features,
                                    bool classification) {
  using namespace tabrag;
  Rng rng(seed);
  std::vector<ColumnSchema> schema;
  std::vector<bool> categorical;
  std::vector<std::size_t> levels;
  for (std::size_t f = 0; f < features; ++f) {
    const bool cat = rng.uniform() < 0.4;
    categorical.push_back(cat);
    levels.push_back(2 + rng.below(4));
    schema.push_back({"f" + std::to_string(f), cat ? ColumnKind::kCategorical : ColumnKind::kNumerical,
                      ColumnRole::kFeature});
  }
  schema.push_back({"label", classification ? ColumnKind::kCategorical : ColumnKind::kNumerical,
                    ColumnRole::kLabel});
  const std::size_t classes = 2 + rng.below(3);
  DatasetBuilder b(schema, classification ? TaskKind::kClassification : TaskKind::kRegression);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<Cell> cells;
    double signal = 0.0;
    for (std::size_t f = 0; f < features; ++f) {
      if (categorical[f]) {
        const auto level = rng.below(levels[f]);
        signal += static_cast<double>(level) * (f % 2 ? 1.0 : -0.5);
        cells.emplace_back(rng.uniform() < 0.05 ? std::string() : "c" + std::to_string(level));
      } else {
        // Coarse grid values produce ties on purpose.
        const double v = rng.uniform() < 0.5 ? std::round(rng.normal() * 4.0) : rng.normal() * 10.0;
        signal += v * (f % 3 == 0 ? 1.0 : 0.1);
        if (rng.uniform() < 0.05) {
          cells.emplace_back(std::monostate{});
        } else {
          cells.emplace_back(v);
        }
      }
    }
    const double noisy = signal + rng.normal();
    if (classification) {
      const auto c = static_cast<std::size_t>(std::abs(std::llround(noisy))) % classes;
      cells.emplace_back("k" + std::to_string(c));
    } else {
      cells.emplace_back(noisy);
    }
    b.add_row(cells);
  }
  return std::move(b).build();
}

}  // namespace testing
