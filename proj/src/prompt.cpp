#include "tabrag/prompt.hpp"

#include <cmath>

#include "tabrag/error.hpp"
#include "tabrag/text.hpp"

namespace tabrag {

namespace {

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Placeholder substitution in one pass so that substituted values that
// happen to contain "{...}" are left alone.
std::string fill(std::string_view layout,
                 std::initializer_list<std::pair<std::string_view, std::string_view>> values) {
  std::string out;
  for (std::size_t i = 0; i < layout.size();) {
    bool replaced = false;
    if (layout[i] == '{') {
      for (const auto& [key, value] : values) {
        if (layout.substr(i, key.size()) == key) {
          out += value;
          i += key.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(layout[i++]);
  }
  return out;
}

class RowRenderer {
 public:
  RowRenderer(const PromptTemplate& tmpl, const ContextPool& pool) : tmpl_(tmpl), pool_(pool) {
    const auto& features = pool.features();
    for (std::size_t f = 0; f < features.size(); ++f) {
      names_.push_back(tmpl.anonymize ? "f" + std::to_string(f + 1) : features[f].name);
    }
    label_name_ = tmpl.anonymize ? "target" : pool.data().label_name();
  }

  const std::string& label_name() const { return label_name_; }

  std::string pairs_for_row(std::size_t row) const {
    return pairs(pool_.query_from_row(row));
  }

  std::string pairs(const Query& q) const {
    const auto& features = pool_.features();
    std::string out;
    for (std::size_t f = 0; f < features.size(); ++f) {
      if (f > 0) out += ", ";
      out += names_[f];
      out += ": ";
      if (features[f].kind == ColumnKind::kNumerical) {
        out += is_missing(q.numbers[f]) ? tmpl_.missing_text : format_number(q.numbers[f]);
      } else if (q.codes[f] == kUnseenCategory) {
        out += tmpl_.missing_text;
      } else {
        const auto& token =
            pool_.data().column(features[f].column).categories[static_cast<std::size_t>(q.codes[f])];
        out += token.empty() ? tmpl_.missing_text : token;
      }
    }
    return out;
  }

  std::string label_text(std::size_t row) const {
    const Dataset& d = pool_.data();
    if (d.task() == TaskKind::kClassification) return d.class_labels()[d.label_class(row)];
    return format_number(d.label_value(row));
  }

  std::string context_line(std::size_t row) const {
    return pairs_for_row(row) + ", " + tmpl_.answer_slot + " " + label_text(row);
  }

  std::string preamble() const {
    const Dataset& d = pool_.data();
    std::string text = tmpl_.preamble;
    if (text.empty()) {
      text = d.task() == TaskKind::kClassification
                 ? "Predict the value of {label} for the last row. Answer with one of: {classes}."
                 : "Predict the numerical value of {label} for the last row.";
    }
    std::string classes;
    if (d.task() == TaskKind::kClassification) {
      for (std::size_t c = 0; c < d.num_classes(); ++c) {
        if (c > 0) classes += ", ";
        classes += d.class_labels()[c];
      }
    }
    return fill(text, {{"{label}", label_name_}, {"{classes}", classes}});
  }

 private:
  const PromptTemplate& tmpl_;
  const ContextPool& pool_;
  std::vector<std::string> names_;
  std::string label_name_;
};

std::string render(const PromptTemplate& tmpl, const std::string& preamble,
                   std::span<const std::string> lines, const std::string& query) {
  std::string rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0) rows.push_back('\n');
    rows += lines[i];
  }
  std::string layout = tmpl.layout;
  // Zero-shot form: drop the empty rows line entirely.
  if (lines.empty()) replace_all(layout, "{rows}\n", "");
  return fill(layout, {{"{preamble}", preamble},
                       {"{rows}", rows},
                       {"{query}", query},
                       {"{answer_slot}", tmpl.answer_slot}});
}

}  // namespace

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
  PromptTemplate tmpl;
  tmpl.layout = read_text_file(path);
  // A trailing newline in the file would put the answer slot on a
  // finished line.
  while (!tmpl.layout.empty() && (tmpl.layout.back() == '\n' || tmpl.layout.back() == '\r')) {
    tmpl.layout.pop_back();
  }
  if (tmpl.layout.find("{query}") == std::string::npos) {
    throw InputError("prompt template has no {query} placeholder: " + path.string());
  }
  return tmpl;
}

std::size_t estimate_tokens(const PromptTemplate& tmpl, std::string_view text) {
  if (!(tmpl.chars_per_token > 0.0)) throw ContractError("chars_per_token must be positive");
  return static_cast<std::size_t>(std::ceil(static_cast<double>(text.size()) / tmpl.chars_per_token));
}

std::string serialize_prompt(const PromptTemplate& tmpl, const ContextPool& pool,
                             std::span<const std::size_t> context_rows, const Query& query) {
  const RowRenderer renderer(tmpl, pool);
  std::vector<std::string> lines;
  lines.reserve(context_rows.size());
  for (std::size_t r : context_rows) lines.push_back(renderer.context_line(r));
  return render(tmpl, renderer.preamble(), lines, renderer.pairs(query));
}

Prompt build_prompt(const PromptTemplate& tmpl, const ContextPool& pool,
                    std::span<const std::size_t> context_rows, const Query& query,
                    std::size_t token_budget) {
  const RowRenderer renderer(tmpl, pool);
  const std::string preamble = renderer.preamble();
  const std::string query_text = renderer.pairs(query);
  std::vector<std::string> lines;
  lines.reserve(context_rows.size());
  for (std::size_t r : context_rows) lines.push_back(renderer.context_line(r));

  Prompt prompt;
  for (std::size_t keep = lines.size();; --keep) {
    std::span<const std::string> kept(lines.data(), keep);
    prompt.text = render(tmpl, preamble, kept, query_text);
    prompt.token_estimate = estimate_tokens(tmpl, prompt.text);
    if (prompt.token_estimate <= token_budget) {
      prompt.context_rows.assign(context_rows.begin(),
                                 context_rows.begin() + static_cast<std::ptrdiff_t>(keep));
      return prompt;
    }
    if (keep == 0) break;
  }
  throw ContractError("query alone exceeds the token budget (" +
                      std::to_string(prompt.token_estimate) + " > " +
                      std::to_string(token_budget) + ")");
}

}  // namespace tabrag
