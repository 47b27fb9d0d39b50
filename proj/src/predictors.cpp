#include "tabrag/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tabrag/error.hpp"
#include "tabrag/text.hpp"

namespace tabrag {

std::vector<double> uniform_probabilities(std::size_t num_classes) {
  if (num_classes == 0) return {};
  return std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes));
}

PredictionRecord knn_predict(const ContextPool& pool, const RetrievedContext& ctx,
                             std::size_t test_row) {
  const Dataset& data = pool.data();
  PredictionRecord rec;
  rec.row = test_row;
  rec.task = data.task();
  rec.predictor = "knn";
  rec.context_size = ctx.size();

  if (data.task() == TaskKind::kClassification) {
    const std::size_t k = data.num_classes();
    if (ctx.empty()) {
      rec.class_probabilities = uniform_probabilities(k);
      rec.fallback = true;
      rec.note = "empty context";
      return rec;
    }
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r : ctx.rows) ++counts[data.label_class(r)];
    rec.class_probabilities.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
      rec.class_probabilities[c] =
          static_cast<double>(counts[c]) / static_cast<double>(ctx.size());
    }
  } else {
    if (ctx.empty()) {
      rec.estimate = pool.label_mean();
      rec.fallback = true;
      rec.note = "empty context";
      return rec;
    }
    double sum = 0.0;
    for (std::size_t r : ctx.rows) sum += data.label_value(r);
    rec.estimate = sum / static_cast<double>(ctx.size());
  }
  return rec;
}

std::vector<PredictionRecord> parse_predictions(std::string_view csv_text, const Dataset& data,
                                                std::span<const std::size_t> test_rows,
                                                const std::string& predictor_id) {
  auto records = parse_csv(csv_text);
  std::erase_if(records, [](const CsvRecord& r) { return r.size() == 1 && r[0].empty(); });
  if (records.empty()) throw InputError("prediction file is empty");
  const CsvRecord& header = records.front();
  if (header.empty() || header[0] != "row_index") {
    throw InputError("prediction file must start with a row_index column");
  }

  const bool classification = data.task() == TaskKind::kClassification;
  // For classification, column position -> class index.
  std::vector<std::size_t> class_of_column;
  if (classification) {
    const auto& labels = data.class_labels();
    if (header.size() != labels.size() + 1) {
      throw InputError("prediction file needs one p_<class> column per class (" +
                       std::to_string(labels.size()) + ")");
    }
    std::set<std::size_t> seen;
    for (std::size_t i = 1; i < header.size(); ++i) {
      if (header[i].rfind("p_", 0) != 0) throw InputError("unexpected column: " + header[i]);
      const std::string name = header[i].substr(2);
      const auto it = std::find(labels.begin(), labels.end(), name);
      if (it == labels.end()) throw InputError("unknown class in prediction file: " + name);
      const auto c = static_cast<std::size_t>(it - labels.begin());
      if (!seen.insert(c).second) throw InputError("duplicate class column: " + header[i]);
      class_of_column.push_back(c);
    }
  } else if (header.size() != 2 || header[1] != "estimate") {
    throw InputError("regression prediction file needs header row_index,estimate");
  }

  const std::set<std::size_t> allowed(test_rows.begin(), test_rows.end());
  std::vector<PredictionRecord> out;
  for (std::size_t line = 1; line < records.size(); ++line) {
    const CsvRecord& fields = records[line];
    const std::string where = "prediction file line " + std::to_string(line + 1);
    if (fields.size() != header.size()) throw InputError(where + ": wrong number of fields");
    const auto index = parse_number(fields[0]);
    if (!index || *index < 0 || std::floor(*index) != *index) {
      throw InputError(where + ": bad row_index");
    }
    PredictionRecord rec;
    rec.row = static_cast<std::size_t>(*index);
    if (!allowed.contains(rec.row)) {
      throw InputError(where + ": row " + std::to_string(rec.row) + " is not a test row");
    }
    rec.task = data.task();
    rec.predictor = predictor_id;
    if (classification) {
      rec.class_probabilities.assign(class_of_column.size(), 0.0);
      double sum = 0.0;
      for (std::size_t i = 1; i < fields.size(); ++i) {
        const auto p = parse_number(fields[i]);
        if (!p || *p < 0.0) throw InputError(where + ": bad probability '" + fields[i] + "'");
        rec.class_probabilities[class_of_column[i - 1]] = *p;
        sum += *p;
      }
      if (sum < 0.99 || sum > 1.01) {
        throw InputError(where + ": probabilities sum to " + format_number(sum));
      }
      for (double& p : rec.class_probabilities) p /= sum;
    } else {
      const auto v = parse_number(fields[1]);
      if (!v) throw InputError(where + ": bad estimate '" + fields[1] + "'");
      rec.estimate = *v;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<PredictionRecord> ingest_predictions(const std::filesystem::path& file,
                                                 const Dataset& data,
                                                 std::span<const std::size_t> test_rows,
                                                 const std::string& predictor_id) {
  return parse_predictions(read_text_file(file), data, test_rows, predictor_id);
}

std::vector<PredictionRecord> ensemble(std::span<const std::vector<PredictionRecord>> inputs,
                                       const std::string& predictor_id) {
  if (inputs.empty()) throw ContractError("ensemble needs at least one predictor");
  const auto& first = inputs.front();
  for (const auto& other : inputs) {
    if (other.size() != first.size()) throw ContractError("ensemble: predictors cover different rows");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (other[i].row != first[i].row || other[i].task != first[i].task ||
          other[i].class_probabilities.size() != first[i].class_probabilities.size()) {
        throw ContractError("ensemble: predictors cover different rows");
      }
    }
  }
  const double k = static_cast<double>(inputs.size());
  std::vector<PredictionRecord> out;
  out.reserve(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    PredictionRecord rec;
    rec.row = first[i].row;
    rec.task = first[i].task;
    rec.predictor = predictor_id;
    rec.class_probabilities.assign(first[i].class_probabilities.size(), 0.0);
    for (const auto& input : inputs) {
      const PredictionRecord& r = input[i];
      for (std::size_t c = 0; c < r.class_probabilities.size(); ++c) {
        rec.class_probabilities[c] += r.class_probabilities[c];
      }
      rec.estimate += r.estimate;
      rec.context_size = std::max(rec.context_size, r.context_size);
      rec.fallback = rec.fallback || r.fallback;
    }
    for (double& p : rec.class_probabilities) p /= k;
    rec.estimate /= k;
    out.push_back(std::move(rec));
  }
  return out;
}

std::string predictions_to_csv(std::span<const PredictionRecord> records, const Dataset& data) {
  CsvRecord header{"row_index"};
  const bool classification = data.task() == TaskKind::kClassification;
  if (classification) {
    for (const auto& label : data.class_labels()) header.push_back("p_" + label);
  } else {
    header.push_back("estimate");
  }
  std::string out = csv_line(header);
  for (const auto& rec : records) {
    CsvRecord fields{std::to_string(rec.row)};
    if (classification) {
      for (double p : rec.class_probabilities) fields.push_back(format_number(p));
    } else {
      fields.push_back(format_number(rec.estimate));
    }
    out += csv_line(fields);
  }
  return out;
}

}  // namespace tabrag
