#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tabrag/retrieval.hpp"

namespace tabrag {

inline constexpr std::size_t kDefaultTokenBudget = 16384;

// Text layout for a prompt. `layout` may use the placeholders {preamble},
// {rows}, {query} and {answer_slot}; `preamble` may use {label} and
// {classes}. Every context row renders on one line as
// "name: value, ..., <answer_slot> <label>"; the query renders its pairs
// only and the layout places the empty answer slot after it.
struct PromptTemplate {
  std::string preamble;  // empty: a task-specific default
  std::string layout = "{preamble}\n\n{rows}\n{query}, {answer_slot}";
  std::string answer_slot = "Answer:";
  // Replace feature names with f1..fn and the label name with "target".
  bool anonymize = false;
  std::string missing_text = "NA";
  double chars_per_token = 4.0;

  // Reads a layout file (plain text with the named placeholders).
  static PromptTemplate from_file(const std::filesystem::path& path);
};

// Rendered prompt plus the context rows that made it in.
struct Prompt {
  std::string text;
  std::vector<std::size_t> context_rows;
  std::size_t token_estimate = 0;
};

std::size_t estimate_tokens(const PromptTemplate& tmpl, std::string_view text);

// Deterministic rendering of `context_rows` (dataset rows with labels) and
// the query. No budget handling.
std::string serialize_prompt(const PromptTemplate& tmpl, const ContextPool& pool,
                             std::span<const std::size_t> context_rows, const Query& query);

// Renders the prompt, dropping context rows from the end (the farthest,
// for distance-ordered input) until the token estimate fits the budget.
// Throws ContractError when the query alone does not fit.
Prompt build_prompt(const PromptTemplate& tmpl, const ContextPool& pool,
                    std::span<const std::size_t> context_rows, const Query& query,
                    std::size_t token_budget = kDefaultTokenBudget);

}  // namespace tabrag
