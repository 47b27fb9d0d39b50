#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tabrag/dataset.hpp"
#include "tabrag/retrieval.hpp"

namespace tabrag {

struct PredictionRecord {
  std::size_t row = 0;  // dataset row index of the test row
  TaskKind task = TaskKind::kClassification;
  std::vector<double> class_probabilities;  // classification, class_labels order
  double estimate = 0.0;                    // regression
  std::string predictor;
  std::size_t context_size = 0;
  // Set when the predictor fell back to a default (unparseable completion,
  // transport failure).
  bool fallback = false;
  std::string note;
};

// Unweighted label frequencies (classification) or mean (regression) of
// the context rows. Empty context: uniform over classes, or the pool's
// label mean.
PredictionRecord knn_predict(const ContextPool& pool, const RetrievedContext& ctx,
                             std::size_t test_row = 0);

// Uniform distribution over the dataset's classes.
std::vector<double> uniform_probabilities(std::size_t num_classes);

// Reads an external prediction file. Regression: header `row_index,estimate`.
// Classification: `row_index,p_<class>...` with one column per class label
// (any order). Probability rows summing within [0.99, 1.01] are rescaled to
// 1; anything else is an error. Every row index must be in `test_rows`.
std::vector<PredictionRecord> ingest_predictions(const std::filesystem::path& file,
                                                 const Dataset& data,
                                                 std::span<const std::size_t> test_rows,
                                                 const std::string& predictor_id);
std::vector<PredictionRecord> parse_predictions(std::string_view csv_text, const Dataset& data,
                                                std::span<const std::size_t> test_rows,
                                                const std::string& predictor_id);

// Per-row mean of probability vectors or point estimates. Every input must
// cover the same rows in the same order.
std::vector<PredictionRecord> ensemble(std::span<const std::vector<PredictionRecord>> inputs,
                                       const std::string& predictor_id = "ensemble");

// Writes records in the external prediction file format.
std::string predictions_to_csv(std::span<const PredictionRecord> records, const Dataset& data);

}  // namespace tabrag
