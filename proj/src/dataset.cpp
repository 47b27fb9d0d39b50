#include "tabrag/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "tabrag/error.hpp"
#include "tabrag/random.hpp"
#include "tabrag/text.hpp"

namespace tabrag {

using nlohmann::json;

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::kNumerical ? "numerical" : "categorical";
}

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::kFeature:
      return "feature";
    case ColumnRole::kLabel:
      return "label";
    case ColumnRole::kIgnored:
      return "ignored";
  }
  return "feature";
}

std::string_view to_string(TaskKind task) {
  return task == TaskKind::kClassification ? "classification" : "regression";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "numerical") return ColumnKind::kNumerical;
  if (text == "categorical") return ColumnKind::kCategorical;
  throw InputError("unknown column kind: " + std::string(text));
}

ColumnRole parse_column_role(std::string_view text) {
  if (text == "feature") return ColumnRole::kFeature;
  if (text == "label") return ColumnRole::kLabel;
  if (text == "ignored") return ColumnRole::kIgnored;
  throw InputError("unknown column role: " + std::string(text));
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "classification") return TaskKind::kClassification;
  if (text == "regression") return TaskKind::kRegression;
  throw InputError("unknown task: " + std::string(text));
}

std::int32_t Column::find_code(std::string_view token) const {
  const auto it = std::find(categories.begin(), categories.end(), token);
  if (it == categories.end()) return kUnseenCategory;
  return static_cast<std::int32_t>(it - categories.begin());
}

// ---------------------------------------------------------------------------
// Dataset

std::optional<std::size_t> Dataset::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    if (schema_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Dataset::column_index(std::string_view name) const {
  if (auto index = find_column(name)) return *index;
  throw ContractError("unknown column: " + std::string(name));
}

const std::vector<std::string>& Dataset::class_labels() const {
  if (task_ != TaskKind::kClassification) {
    throw ContractError("class_labels() requires a classification dataset");
  }
  return columns_[label_column_].categories;
}

std::size_t Dataset::label_class(std::size_t row) const {
  return static_cast<std::size_t>(columns_[label_column_].codes.at(row));
}

double Dataset::label_value(std::size_t row) const {
  if (task_ != TaskKind::kRegression) {
    throw ContractError("label_value() requires a regression dataset");
  }
  return columns_[label_column_].numbers.at(row);
}

std::string Dataset::cell_text(std::size_t row, std::size_t col) const {
  const Column& c = columns_.at(col);
  if (c.kind == ColumnKind::kNumerical) return format_number(c.numbers.at(row));
  return c.categories.at(static_cast<std::size_t>(c.codes.at(row)));
}

bool Dataset::operator==(const Dataset& other) const {
  if (schema_ != other.schema_ || task_ != other.task_ || num_rows_ != other.num_rows_) {
    return false;
  }
  for (std::size_t col = 0; col < schema_.size(); ++col) {
    for (std::size_t row = 0; row < num_rows_; ++row) {
      if (cell_text(row, col) != other.cell_text(row, col)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// DatasetBuilder

namespace {

// Index of the label column; throws InputError on an invalid schema.
std::size_t checked_label(const std::vector<ColumnSchema>& schema, TaskKind task) {
  if (schema.empty()) throw InputError("schema has no columns");
  std::unordered_set<std::string> names;
  std::optional<std::size_t> label;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (!names.insert(schema[i].name).second) {
      throw InputError("duplicate column name: " + schema[i].name);
    }
    if (schema[i].role == ColumnRole::kLabel) {
      if (label) throw InputError("schema declares more than one label column");
      label = i;
    }
  }
  if (!label) throw InputError("schema has no label column");
  if (task == TaskKind::kRegression && schema[*label].kind != ColumnKind::kNumerical) {
    throw InputError("regression label column must be numerical: " + schema[*label].name);
  }
  return *label;
}

}  // namespace

DatasetBuilder::DatasetBuilder(std::vector<ColumnSchema> schema, TaskKind task) {
  const std::size_t label = checked_label(schema, task);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].role == ColumnRole::kFeature) data_.feature_columns_.push_back(i);
  }

  data_.schema_ = std::move(schema);
  data_.task_ = task;
  data_.label_column_ = label;
  data_.columns_.resize(data_.schema_.size());
  for (std::size_t i = 0; i < data_.schema_.size(); ++i) {
    ColumnKind kind = data_.schema_[i].kind;
    if (i == label && task == TaskKind::kClassification) kind = ColumnKind::kCategorical;
    data_.columns_[i].kind = kind;
  }
}

void DatasetBuilder::append_categorical(std::size_t col, std::string token) {
  Column& c = data_.columns_[col];
  std::int32_t code = c.find_code(token);
  if (code == kUnseenCategory) {
    code = static_cast<std::int32_t>(c.categories.size());
    c.categories.push_back(std::move(token));
  }
  c.codes.push_back(code);
}

DatasetBuilder& DatasetBuilder::add_text_row(std::span<const std::string> cells) {
  if (cells.size() != data_.columns_.size()) {
    throw InputError("row " + std::to_string(data_.num_rows_) + " has " +
                     std::to_string(cells.size()) + " cells, expected " +
                     std::to_string(data_.columns_.size()));
  }
  for (std::size_t col = 0; col < cells.size(); ++col) {
    Column& c = data_.columns_[col];
    if (c.kind == ColumnKind::kNumerical) {
      const double v = parse_number(cells[col]).value_or(std::nan(""));
      if (col == data_.label_column_ && is_missing(v)) {
        throw InputError("regression label at row " + std::to_string(data_.num_rows_) +
                         " is not a finite number: '" + cells[col] + "'");
      }
      c.numbers.push_back(v);
    } else {
      append_categorical(col, cells[col]);
    }
  }
  ++data_.num_rows_;
  return *this;
}

DatasetBuilder& DatasetBuilder::add_row(std::span<const Cell> cells) {
  if (cells.size() != data_.columns_.size()) {
    throw InputError("row has " + std::to_string(cells.size()) + " cells, expected " +
                     std::to_string(data_.columns_.size()));
  }
  for (std::size_t col = 0; col < cells.size(); ++col) {
    Column& c = data_.columns_[col];
    const Cell& cell = cells[col];
    if (c.kind == ColumnKind::kNumerical) {
      double v = std::nan("");
      if (const auto* d = std::get_if<double>(&cell)) {
        if (std::isfinite(*d)) v = *d;
      } else if (const auto* s = std::get_if<std::string>(&cell)) {
        v = parse_number(*s).value_or(std::nan(""));
      }
      if (col == data_.label_column_ && is_missing(v)) {
        throw InputError("regression label at row " + std::to_string(data_.num_rows_) +
                         " is not a finite number");
      }
      c.numbers.push_back(v);
    } else {
      std::string token;
      if (const auto* d = std::get_if<double>(&cell)) {
        token = format_number(*d);
      } else if (const auto* s = std::get_if<std::string>(&cell)) {
        token = *s;
      }
      append_categorical(col, std::move(token));
    }
  }
  ++data_.num_rows_;
  return *this;
}

Dataset DatasetBuilder::build() && { return std::move(data_); }

// ---------------------------------------------------------------------------
// Schema and table files

TableSchema parse_schema(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("schema: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array()) {
    throw InputError("schema: expected an object with a \"columns\" array");
  }
  TableSchema schema;
  std::optional<ColumnKind> label_kind;
  for (const auto& entry : doc["columns"]) {
    if (!entry.is_object() || !entry.contains("name")) {
      throw InputError("schema: every column needs a name");
    }
    ColumnSchema col;
    col.name = entry.at("name").get<std::string>();
    col.kind = parse_column_kind(entry.value("kind", std::string("numerical")));
    col.role = parse_column_role(entry.value("role", std::string("feature")));
    if (col.role == ColumnRole::kLabel) label_kind = col.kind;
    schema.columns.push_back(std::move(col));
  }
  if (doc.contains("task")) {
    schema.task = parse_task_kind(doc["task"].get<std::string>());
  } else if (label_kind) {
    schema.task = *label_kind == ColumnKind::kCategorical ? TaskKind::kClassification
                                                          : TaskKind::kRegression;
  }
  checked_label(schema.columns, schema.task);
  return schema;
}

TableSchema load_schema(const std::filesystem::path& schema_file) {
  return parse_schema(read_text_file(schema_file));
}

std::string schema_to_json(const TableSchema& schema) {
  json doc;
  doc["columns"] = json::array();
  for (const auto& col : schema.columns) {
    doc["columns"].push_back({{"name", col.name},
                              {"kind", std::string(to_string(col.kind))},
                              {"role", std::string(to_string(col.role))}});
  }
  doc["task"] = std::string(to_string(schema.task));
  return doc.dump(2) + "\n";
}

Dataset dataset_from_csv(std::string_view table_text, const TableSchema& schema) {
  auto records = parse_csv(table_text);
  // Blank lines parse as a single empty field.
  std::erase_if(records, [](const CsvRecord& r) { return r.size() == 1 && r[0].empty(); });
  if (records.empty()) throw InputError("table is empty (no header row)");

  const CsvRecord& header = records.front();
  if (header.size() != schema.columns.size()) {
    throw InputError("header has " + std::to_string(header.size()) + " columns, schema has " +
                     std::to_string(schema.columns.size()));
  }
  // Map each schema column to its header position.
  std::vector<std::size_t> source(schema.columns.size());
  for (std::size_t i = 0; i < schema.columns.size(); ++i) {
    const auto it = std::find(header.begin(), header.end(), schema.columns[i].name);
    if (it == header.end()) {
      throw InputError("schema column not found in header: " + schema.columns[i].name);
    }
    source[i] = static_cast<std::size_t>(it - header.begin());
  }
  if (records.size() == 1) throw InputError("table has a header but no rows");

  DatasetBuilder builder(schema.columns, schema.task);
  std::vector<std::string> cells(schema.columns.size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      throw InputError("table row " + std::to_string(r) + " has " +
                       std::to_string(records[r].size()) + " fields, header has " +
                       std::to_string(header.size()));
    }
    for (std::size_t i = 0; i < source.size(); ++i) cells[i] = records[r][source[i]];
    builder.add_text_row(cells);
  }
  return std::move(builder).build();
}

Dataset load_dataset(const std::filesystem::path& table_file,
                     const std::filesystem::path& schema_file) {
  const TableSchema schema = load_schema(schema_file);
  return dataset_from_csv(read_text_file(table_file), schema);
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  CsvRecord fields;
  for (const auto& col : data.schema()) fields.push_back(col.name);
  out += csv_line(fields);
  for (std::size_t row = 0; row < data.num_rows(); ++row) {
    fields.clear();
    for (std::size_t col = 0; col < data.num_columns(); ++col) {
      fields.push_back(data.cell_text(row, col));
    }
    out += csv_line(fields);
  }
  return out;
}

void write_dataset(const Dataset& data, const std::filesystem::path& table_file) {
  write_text_file(table_file, dataset_to_csv(data));
}

// ---------------------------------------------------------------------------
// Splits

namespace {

void apply_caps(SplitAssignment& split, std::size_t train_cap, std::size_t test_cap) {
  if (train_cap == 0 || test_cap == 0) throw ContractError("split caps must be positive");
  split.train = sample_without_replacement(std::move(split.train), train_cap,
                                           derive_seed(split.seed, "train-cap"));
  split.test = sample_without_replacement(std::move(split.test), test_cap,
                                          derive_seed(split.seed, "test-cap"));
  std::sort(split.validation.begin(), split.validation.end());
}

}  // namespace

SplitAssignment make_split(const Dataset& data, SplitRatios ratios, std::uint64_t seed,
                           std::size_t train_cap, std::size_t test_cap) {
  const std::size_t n = data.num_rows();
  if (n < 3) throw ContractError("dataset needs at least 3 rows to split");
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw ContractError("split fractions must be nonnegative and sum to 1");
  }
  // A small epsilon keeps exact products like 100 * 0.8 from flooring to 79.
  const auto count = [n](double fraction) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
  };
  const std::size_t n_train = std::min(n, count(ratios.train));
  const std::size_t n_val = std::min(n - n_train, count(ratios.validation));

  const auto order = permutation(n, derive_seed(seed, "split"));
  SplitAssignment split;
  split.seed = seed;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  apply_caps(split, train_cap, test_cap);
  return split;
}

SplitAssignment load_external_split(std::size_t num_rows, std::vector<std::size_t> train,
                                    std::vector<std::size_t> validation,
                                    std::vector<std::size_t> test, std::uint64_t seed,
                                    std::size_t train_cap, std::size_t test_cap) {
  std::set<std::size_t> seen;
  for (const auto* set : {&train, &validation, &test}) {
    for (std::size_t index : *set) {
      if (index >= num_rows) {
        throw InputError("split index " + std::to_string(index) + " out of range for " +
                         std::to_string(num_rows) + " rows");
      }
      if (!seen.insert(index).second) {
        throw InputError("split index " + std::to_string(index) + " appears more than once");
      }
    }
  }
  SplitAssignment split{std::move(train), std::move(validation), std::move(test), seed};
  apply_caps(split, train_cap, test_cap);
  return split;
}

SplitAssignment load_split_file(const std::filesystem::path& path, std::size_t num_rows,
                                std::size_t train_cap, std::size_t test_cap) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw InputError("split file " + path.string() + ": " + e.what());
  }
  const auto indices = [&](const char* key) {
    if (!doc.contains(key)) return std::vector<std::size_t>{};
    return doc.at(key).get<std::vector<std::size_t>>();
  };
  return load_external_split(num_rows, indices("train"), indices("validation"), indices("test"),
                             doc.value("seed", std::uint64_t{0}), train_cap, test_cap);
}

std::string split_to_json(const SplitAssignment& split) {
  json doc = {{"train", split.train},
              {"validation", split.validation},
              {"test", split.test},
              {"seed", split.seed}};
  return doc.dump() + "\n";
}

}  // namespace tabrag
