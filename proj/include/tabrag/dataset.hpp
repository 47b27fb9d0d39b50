#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tabrag {

enum class ColumnKind { kNumerical, kCategorical };
enum class ColumnRole { kFeature, kLabel, kIgnored };
enum class TaskKind { kClassification, kRegression };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(ColumnRole role);
std::string_view to_string(TaskKind task);
ColumnKind parse_column_kind(std::string_view text);
ColumnRole parse_column_role(std::string_view text);
TaskKind parse_task_kind(std::string_view text);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::kNumerical;
  ColumnRole role = ColumnRole::kFeature;

  bool operator==(const ColumnSchema&) const = default;
};

// Code for a category token that a column has never seen. Only appears in
// queries built from foreign values; stored cells always carry a valid code.
inline constexpr std::int32_t kUnseenCategory = -1;

// A single column. Numerical cells are doubles with NaN as the missing
// marker. Categorical cells are codes into `categories`, assigned in
// first-appearance order; a missing categorical cell is the empty token "",
// which is an ordinary category.
struct Column {
  ColumnKind kind = ColumnKind::kNumerical;
  std::vector<double> numbers;
  std::vector<std::int32_t> codes;
  std::vector<std::string> categories;

  std::size_t size() const {
    return kind == ColumnKind::kNumerical ? numbers.size() : codes.size();
  }
  // Code of `token`, or kUnseenCategory.
  std::int32_t find_code(std::string_view token) const;
};

inline bool is_missing(double v) { return std::isnan(v); }

// Input cell for programmatic construction: monostate is missing.
using Cell = std::variant<std::monostate, double, std::string>;

// Immutable column-oriented table with one label column.
//
// For classification the label column is stored categorically regardless
// of its declared kind, and class_labels() is its category list in
// first-appearance order, so label codes are class indices.
class Dataset {
 public:
  const std::vector<ColumnSchema>& schema() const { return schema_; }
  TaskKind task() const { return task_; }
  std::size_t num_rows() const { return num_rows_; }
  std::size_t num_columns() const { return schema_.size(); }

  const Column& column(std::size_t index) const { return columns_.at(index); }
  std::size_t column_index(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;

  // Indices of columns with role=feature, in schema order.
  const std::vector<std::size_t>& feature_columns() const { return feature_columns_; }
  std::size_t label_column() const { return label_column_; }
  const std::string& label_name() const { return schema_[label_column_].name; }

  const std::vector<std::string>& class_labels() const;
  std::size_t num_classes() const { return class_labels().size(); }

  // Class index of a row's label (classification only).
  std::size_t label_class(std::size_t row) const;
  // Numeric label value (regression only).
  double label_value(std::size_t row) const;

  // Text form of a cell; missing numbers render as "".
  std::string cell_text(std::size_t row, std::size_t col) const;

  bool operator==(const Dataset& other) const;

 private:
  friend class DatasetBuilder;
  std::vector<ColumnSchema> schema_;
  std::vector<Column> columns_;
  TaskKind task_ = TaskKind::kClassification;
  std::size_t num_rows_ = 0;
  std::size_t label_column_ = 0;
  std::vector<std::size_t> feature_columns_;
};

// Validates the schema up front, then accepts rows one at a time.
class DatasetBuilder {
 public:
  DatasetBuilder(std::vector<ColumnSchema> schema, TaskKind task);

  // Text cells, as read from a table file. Numerical parse failures become
  // missing markers.
  DatasetBuilder& add_text_row(std::span<const std::string> cells);
  DatasetBuilder& add_row(std::span<const Cell> cells);
  DatasetBuilder& add_row(std::initializer_list<Cell> cells) {
    return add_row(std::span<const Cell>(cells.begin(), cells.size()));
  }

  Dataset build() &&;

 private:
  void append_categorical(std::size_t col, std::string token);
  Dataset data_;
};

struct TableSchema {
  std::vector<ColumnSchema> columns;
  TaskKind task = TaskKind::kClassification;
};

// Reads the JSON schema sidecar:
// {"columns": [{"name", "kind", "role"}...], "task": "classification"|"regression"}.
// When "task" is absent it follows the label column's kind.
TableSchema load_schema(const std::filesystem::path& schema_file);
TableSchema parse_schema(std::string_view json_text);
std::string schema_to_json(const TableSchema& schema);

Dataset load_dataset(const std::filesystem::path& table_file,
                     const std::filesystem::path& schema_file);
// Header row + records, matched to the schema by column name.
Dataset dataset_from_csv(std::string_view table_text, const TableSchema& schema);

std::string dataset_to_csv(const Dataset& data);
void write_dataset(const Dataset& data, const std::filesystem::path& table_file);

// Row-index sets for one evaluation. Index vectors are sorted ascending.
struct SplitAssignment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;

  bool operator==(const SplitAssignment&) const = default;
};

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

inline constexpr std::size_t kDefaultTrainCap = 100000;
inline constexpr std::size_t kDefaultTestCap = 512;

// Random split by fractions. Set sizes are floor(n * fraction) for train
// and validation, and the rest goes to test. The train set is then capped
// and the test set downsampled, both by uniform sampling without
// replacement. Deterministic for a fixed seed.
SplitAssignment make_split(const Dataset& data, SplitRatios ratios, std::uint64_t seed,
                           std::size_t train_cap = kDefaultTrainCap,
                           std::size_t test_cap = kDefaultTestCap);

// Validates a caller-provided split (in range, pairwise disjoint) and
// applies the same caps as make_split.
SplitAssignment load_external_split(std::size_t num_rows, std::vector<std::size_t> train,
                                    std::vector<std::size_t> validation,
                                    std::vector<std::size_t> test, std::uint64_t seed,
                                    std::size_t train_cap = kDefaultTrainCap,
                                    std::size_t test_cap = kDefaultTestCap);

// Split file: {"train": [...], "validation": [...], "test": [...], "seed": n}.
SplitAssignment load_split_file(const std::filesystem::path& path, std::size_t num_rows,
                                std::size_t train_cap = kDefaultTrainCap,
                                std::size_t test_cap = kDefaultTestCap);
std::string split_to_json(const SplitAssignment& split);

}  // namespace tabrag
