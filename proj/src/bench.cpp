#include "tabrag/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <memory>
#include <numeric>
#include <set>
#include <tuple>

#include <json.hpp>

#include "tabrag/error.hpp"
#include "tabrag/parallel.hpp"
#include "tabrag/predictors.hpp"
#include "tabrag/random.hpp"
#include "tabrag/text.hpp"

namespace tabrag {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = "0.1.0";

std::string_view to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::kKnn: return "knn";
    case PredictorKind::kLlm: return "llm";
    case PredictorKind::kExternal: return "external";
  }
  return "knn";
}

std::string_view to_string(ContextPolicy policy) {
  return policy == ContextPolicy::kRag ? "rag" : "random";
}

ContextPolicy parse_context_policy(std::string_view text) {
  const std::string t = to_lower(trim(text));
  if (t == "rag") return ContextPolicy::kRag;
  if (t == "random") return ContextPolicy::kRandom;
  throw InputError("unknown context policy: " + std::string(text));
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw InputError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw InputError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get(const json& obj, const std::string& key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(where + ": '" + key + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

ApiStyle parse_api_style(const std::string& text, const std::string& where) {
  if (text == "chat") return ApiStyle::kChat;
  if (text == "completion") return ApiStyle::kCompletion;
  throw InputError(where + ": style must be chat or completion");
}

DatasetEntry parse_dataset(const json& j, const fs::path& base, std::uint64_t run_seed) {
  const std::string where = "dataset entry";
  check_keys(j, where, {"id", "table", "schema", "split", "split_file", "toy"});
  DatasetEntry e;
  e.id = get<std::string>(j, "id", where, "");
  if (j.contains("toy")) {
    const json& t = j["toy"];
    const std::string tw = "toy dataset '" + e.id + "'";
    check_keys(t, tw, {"shape", "noise", "n_train", "n_test", "seed"});
    ToySpec spec;
    spec.shape = parse_toy_shape(get<std::string>(t, "shape", tw, "circle"));
    spec.noise = get<double>(t, "noise", tw, 0.1);
    spec.n_train = get<std::size_t>(t, "n_train", tw, 128);
    spec.seed = get<std::uint64_t>(t, "seed", tw, run_seed);
    e.toy = spec;
    e.toy_n_test = get<std::size_t>(t, "n_test", tw, 200);
    if (e.id.empty()) e.id = std::string(to_string(spec.shape));
  } else {
    e.table = resolve(base, get<std::string>(j, "table", where, ""));
    e.schema = resolve(base, get<std::string>(j, "schema", where, ""));
    if (e.id.empty()) e.id = e.table.stem().string();
  }
  if (j.contains("split_file")) e.split_file = resolve(base, get<std::string>(j, "split_file", where, ""));
  if (j.contains("split")) {
    const json& s = j["split"];
    check_keys(s, where + " split", {"train", "validation", "test", "train_cap", "test_cap"});
    e.ratios.train = get<double>(s, "train", where, e.ratios.train);
    e.ratios.validation = get<double>(s, "validation", where, e.ratios.validation);
    e.ratios.test = get<double>(s, "test", where, e.ratios.test);
    e.train_cap = get<std::size_t>(s, "train_cap", where, e.train_cap);
    e.test_cap = get<std::size_t>(s, "test_cap", where, e.test_cap);
  }
  return e;
}

PredictorEntry parse_predictor(const json& j, const fs::path& base) {
  const std::string where = "predictor entry";
  check_keys(j, where, {"id", "kind", "endpoint", "prompt_template", "anonymize", "token_budget", "files"});
  PredictorEntry p;
  const std::string kind = get<std::string>(j, "kind", where, "knn");
  if (kind == "knn") {
    p.kind = PredictorKind::kKnn;
  } else if (kind == "llm") {
    p.kind = PredictorKind::kLlm;
  } else if (kind == "external") {
    p.kind = PredictorKind::kExternal;
  } else {
    throw InputError(where + ": unknown kind '" + kind + "'");
  }
  p.id = get<std::string>(j, "id", where, kind);
  if (j.contains("endpoint")) {
    const json& ep = j["endpoint"];
    const std::string ew = "endpoint of predictor '" + p.id + "'";
    check_keys(ep, ew, {"base_url", "path", "model", "style", "api_key_env", "max_output_tokens",
                        "timeout_seconds", "max_retries", "backoff_seconds", "max_in_flight",
                        "logprobs", "top_logprobs"});
    LlmEndpoint& e = p.endpoint;
    e.base_url = get<std::string>(ep, "base_url", ew, e.base_url);
    e.path = get<std::string>(ep, "path", ew, e.path);
    e.model = get<std::string>(ep, "model", ew, e.model);
    e.style = parse_api_style(get<std::string>(ep, "style", ew, "chat"), ew);
    e.api_key_env = get<std::string>(ep, "api_key_env", ew, e.api_key_env);
    e.max_output_tokens = get<int>(ep, "max_output_tokens", ew, e.max_output_tokens);
    e.timeout_seconds = get<double>(ep, "timeout_seconds", ew, e.timeout_seconds);
    e.max_retries = get<int>(ep, "max_retries", ew, e.max_retries);
    e.backoff_seconds = get<double>(ep, "backoff_seconds", ew, e.backoff_seconds);
    e.max_in_flight = get<std::size_t>(ep, "max_in_flight", ew, e.max_in_flight);
    e.request_logprobs = get<bool>(ep, "logprobs", ew, e.request_logprobs);
    e.top_logprobs = get<int>(ep, "top_logprobs", ew, e.top_logprobs);
  }
  if (j.contains("prompt_template")) {
    p.prompt_template = resolve(base, get<std::string>(j, "prompt_template", where, ""));
  }
  p.anonymize = get<bool>(j, "anonymize", where, false);
  p.token_budget = get<std::size_t>(j, "token_budget", where, kDefaultTokenBudget);
  if (j.contains("files")) {
    if (!j["files"].is_object()) throw InputError(where + ": files must map dataset ids to paths");
    for (const auto& [id, path] : j["files"].items()) {
      if (!path.is_string()) throw InputError(where + ": file for '" + id + "' must be a path");
      p.files[id] = resolve(base, path.get<std::string>());
    }
  }
  return p;
}

template <typename T>
std::vector<T> get_list(const json& obj, const std::string& key, std::vector<T> fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<std::vector<T>>();
  } catch (const json::exception&) {
    throw InputError("'" + key + "' must be a list");
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  const std::string where = "config";
  check_keys(doc, where, {"datasets", "predictors", "retrieval", "policies", "context_sizes",
                          "train_sizes", "pps", "output_dir", "seed", "workers", "threads", "traces",
                          "shuffle_context"});
  RunConfig cfg;
  cfg.seed = get<std::uint64_t>(doc, "seed", where, 0);
  if (doc.contains("datasets")) {
    if (!doc["datasets"].is_array()) throw InputError("'datasets' must be a list");
    for (const auto& d : doc["datasets"]) cfg.datasets.push_back(parse_dataset(d, base_dir, cfg.seed));
  }
  if (doc.contains("predictors")) {
    if (!doc["predictors"].is_array()) throw InputError("'predictors' must be a list");
    for (const auto& p : doc["predictors"]) cfg.predictors.push_back(parse_predictor(p, base_dir));
  } else {
    cfg.predictors.push_back(PredictorEntry{});
  }
  if (doc.contains("retrieval")) {
    const json& r = doc["retrieval"];
    const std::string rw = "retrieval";
    check_keys(r, rw, {"importance_mode", "numeric_norm", "norm_overrides", "distance_minmax_rescale",
                       "match_constraints"});
    RetrievalConfig& rc = cfg.retrieval;
    rc.importance_mode = parse_importance_mode(get<std::string>(r, "importance_mode", rw, "dual"));
    rc.numeric_norm = parse_norm_mode(get<std::string>(r, "numeric_norm", rw, "quantile"));
    if (r.contains("norm_overrides")) {
      if (!r["norm_overrides"].is_object()) throw InputError("norm_overrides must be an object");
      for (const auto& [feature, mode] : r["norm_overrides"].items()) {
        if (!mode.is_string()) throw InputError("norm override for '" + feature + "' must be a string");
        rc.norm_overrides[feature] = parse_norm_mode(mode.get<std::string>());
      }
    }
    rc.distance_minmax_rescale = get<bool>(r, "distance_minmax_rescale", rw, true);
    rc.match_constraints = get_list<std::string>(r, "match_constraints", {});
  }
  if (doc.contains("policies")) {
    cfg.policies.clear();
    for (const auto& p : get_list<std::string>(doc, "policies", {})) {
      cfg.policies.push_back(parse_context_policy(p));
    }
  }
  cfg.context_sizes = get_list<std::size_t>(doc, "context_sizes", cfg.context_sizes);
  cfg.train_sizes = get_list<std::size_t>(doc, "train_sizes", {});
  if (doc.contains("pps")) {
    const json& p = doc["pps"];
    check_keys(p, "pps", {"cv_folds", "max_depth", "quantile_step", "sample_cap"});
    cfg.pps.cv_folds = get<std::size_t>(p, "cv_folds", "pps", cfg.pps.cv_folds);
    cfg.pps.max_depth = get<std::size_t>(p, "max_depth", "pps", cfg.pps.max_depth);
    cfg.pps.quantile_step = get<double>(p, "quantile_step", "pps", cfg.pps.quantile_step);
    cfg.pps.sample_cap = get<std::size_t>(p, "sample_cap", "pps", cfg.pps.sample_cap);
  }
  cfg.output_dir = resolve(base_dir, get<std::string>(doc, "output_dir", where, "tabrag-run"));
  cfg.workers = get<std::size_t>(doc, "workers", where, 1);
  cfg.threads = get<std::size_t>(doc, "threads", where, 1);
  cfg.traces = get<bool>(doc, "traces", where, false);
  cfg.shuffle_context = get<bool>(doc, "shuffle_context", where, false);
  return cfg;
}

RunConfig load_run_config(const fs::path& file) {
  return parse_run_config(read_text_file(file), file.parent_path());
}

std::string run_config_to_json(const RunConfig& cfg) {
  ojson doc;
  doc["seed"] = cfg.seed;
  doc["datasets"] = ojson::array();
  for (const auto& d : cfg.datasets) {
    ojson e;
    e["id"] = d.id;
    if (d.toy) {
      e["toy"] = {{"shape", std::string(to_string(d.toy->shape))},
                  {"noise", d.toy->noise},
                  {"n_train", d.toy->n_train},
                  {"n_test", d.toy_n_test},
                  {"seed", d.toy->seed}};
    } else {
      e["table"] = d.table.string();
      e["schema"] = d.schema.string();
    }
    if (d.split_file) {
      e["split_file"] = d.split_file->string();
    } else {
      e["split"] = {{"train", d.ratios.train},
                    {"validation", d.ratios.validation},
                    {"test", d.ratios.test},
                    {"train_cap", d.train_cap},
                    {"test_cap", d.test_cap}};
    }
    doc["datasets"].push_back(std::move(e));
  }
  doc["predictors"] = ojson::array();
  for (const auto& p : cfg.predictors) {
    ojson e;
    e["id"] = p.id;
    e["kind"] = std::string(to_string(p.kind));
    if (p.kind == PredictorKind::kLlm) {
      const LlmEndpoint& ep = p.endpoint;
      e["endpoint"] = {{"base_url", ep.base_url},
                       {"path", ep.request_path()},
                       {"model", ep.model},
                       {"style", ep.style == ApiStyle::kChat ? "chat" : "completion"},
                       {"api_key_env", ep.api_key_env},
                       {"max_output_tokens", ep.max_output_tokens},
                       {"timeout_seconds", ep.timeout_seconds},
                       {"max_retries", ep.max_retries},
                       {"backoff_seconds", ep.backoff_seconds},
                       {"max_in_flight", ep.max_in_flight},
                       {"logprobs", ep.request_logprobs},
                       {"top_logprobs", ep.top_logprobs}};
      if (p.prompt_template) e["prompt_template"] = p.prompt_template->string();
      e["anonymize"] = p.anonymize;
      e["token_budget"] = p.token_budget;
    }
    if (p.kind == PredictorKind::kExternal) {
      ojson files = ojson::object();
      for (const auto& [id, path] : p.files) files[id] = path.string();
      e["files"] = std::move(files);
    }
    doc["predictors"].push_back(std::move(e));
  }
  ojson overrides = ojson::object();
  for (const auto& [f, m] : cfg.retrieval.norm_overrides) overrides[f] = std::string(to_string(m));
  doc["retrieval"] = {{"importance_mode", std::string(to_string(cfg.retrieval.importance_mode))},
                      {"numeric_norm", std::string(to_string(cfg.retrieval.numeric_norm))},
                      {"norm_overrides", overrides},
                      {"distance_minmax_rescale", cfg.retrieval.distance_minmax_rescale},
                      {"match_constraints", cfg.retrieval.match_constraints}};
  doc["policies"] = ojson::array();
  for (auto p : cfg.policies) doc["policies"].push_back(std::string(to_string(p)));
  doc["context_sizes"] = cfg.context_sizes;
  doc["train_sizes"] = cfg.train_sizes;
  doc["pps"] = {{"cv_folds", cfg.pps.cv_folds},
                {"max_depth", cfg.pps.max_depth},
                {"quantile_step", cfg.pps.quantile_step},
                {"sample_cap", cfg.pps.sample_cap}};
  doc["output_dir"] = cfg.output_dir.string();
  doc["workers"] = cfg.workers;
  doc["threads"] = cfg.threads;
  doc["traces"] = cfg.traces;
  doc["shuffle_context"] = cfg.shuffle_context;
  return doc.dump(2) + "\n";
}

std::vector<std::string> validation_errors(const RunConfig& cfg) {
  std::vector<std::string> errors;
  const auto require_file = [&](const fs::path& p, const std::string& what) {
    std::error_code ec;
    if (p.empty()) {
      errors.push_back(what + " is not set");
    } else if (!fs::is_regular_file(p, ec)) {
      errors.push_back(what + " not found: " + p.string());
      return false;
    }
    return !p.empty();
  };

  if (cfg.datasets.empty()) errors.push_back("no datasets");
  if (cfg.predictors.empty()) errors.push_back("no predictors");
  if (cfg.policies.empty()) errors.push_back("no context policies");
  if (cfg.context_sizes.empty()) errors.push_back("context_sizes is empty");
  for (std::size_t q : cfg.context_sizes) {
    if (q == 0) errors.push_back("context sizes must be positive");
  }
  for (std::size_t i = 0; i < cfg.train_sizes.size(); ++i) {
    if (cfg.train_sizes[i] == 0) errors.push_back("train sizes must be positive");
    if (i > 0 && cfg.train_sizes[i] < cfg.train_sizes[i - 1]) {
      errors.push_back("train_sizes must be ascending");
    }
  }
  if (cfg.workers == 0) errors.push_back("workers must be at least 1");
  if (cfg.threads == 0) errors.push_back("threads must be at least 1");
  if (cfg.pps.cv_folds < 2) errors.push_back("pps.cv_folds must be at least 2");
  if (!(cfg.pps.quantile_step > 0.0 && cfg.pps.quantile_step < 1.0)) {
    errors.push_back("pps.quantile_step must be in (0, 1)");
  }

  std::set<std::string> dataset_ids;
  for (const auto& d : cfg.datasets) {
    const std::string label = "dataset '" + d.id + "'";
    if (d.id.empty()) errors.push_back("dataset with an empty id");
    if (!dataset_ids.insert(d.id).second) errors.push_back("duplicate dataset id: " + d.id);
    if (d.toy) {
      if (!(d.toy->noise >= 0.0 && d.toy->noise <= 1.0)) errors.push_back(label + ": noise must be in [0, 1]");
      if (d.toy->n_train < 2) errors.push_back(label + ": n_train must be at least 2");
      if (d.toy_n_test == 0) errors.push_back(label + ": n_test must be positive");
    } else {
      require_file(d.table, label + " table");
      if (require_file(d.schema, label + " schema")) {
        try {
          load_schema(d.schema);
        } catch (const Error& e) {
          errors.push_back(label + " schema: " + e.what());
        }
      }
    }
    if (d.split_file) {
      require_file(*d.split_file, label + " split file");
    } else if (std::abs(d.ratios.train + d.ratios.validation + d.ratios.test - 1.0) > 1e-9 ||
               d.ratios.train <= 0.0 || d.ratios.test <= 0.0 || d.ratios.validation < 0.0) {
      errors.push_back(label + ": split fractions must be positive and sum to 1");
    }
  }

  std::set<std::string> predictor_ids;
  for (const auto& p : cfg.predictors) {
    const std::string label = "predictor '" + p.id + "'";
    if (p.id.empty()) errors.push_back("predictor with an empty id");
    if (!predictor_ids.insert(p.id).second) errors.push_back("duplicate predictor id: " + p.id);
    if (p.kind == PredictorKind::kLlm) {
      if (p.endpoint.max_in_flight == 0) errors.push_back(label + ": max_in_flight must be at least 1");
      if (p.endpoint.max_retries < 0) errors.push_back(label + ": max_retries must be >= 0");
      if (p.token_budget == 0) errors.push_back(label + ": token_budget must be positive");
      if (p.prompt_template) {
        if (require_file(*p.prompt_template, label + " prompt template")) {
          try {
            PromptTemplate::from_file(*p.prompt_template);
          } catch (const Error& e) {
            errors.push_back(label + ": " + e.what());
          }
        }
      }
    }
    if (p.kind == PredictorKind::kExternal) {
      if (p.files.empty()) errors.push_back(label + ": no prediction files");
      for (const auto& [id, path] : p.files) {
        if (!dataset_ids.contains(id)) errors.push_back(label + ": unknown dataset id '" + id + "'");
        require_file(path, label + " file for '" + id + "'");
      }
    }
  }
  return errors;
}

void validate(const RunConfig& cfg) {
  const auto errors = validation_errors(cfg);
  if (errors.empty()) return;
  std::string message = "invalid config:";
  for (const auto& e : errors) message += "\n  - " + e;
  throw InputError(message);
}

SubSeeds sub_seeds(std::uint64_t run_seed) {
  return {derive_seed(run_seed, "split"), derive_seed(run_seed, "subset"),
          derive_seed(run_seed, "random-policy"), derive_seed(run_seed, "pps"),
          derive_seed(run_seed, "llm-retry-jitter"), derive_seed(run_seed, "context-shuffle")};
}

// ---------------------------------------------------------------------------
// Running

namespace {

struct DatasetOutput {
  DatasetOutcome outcome;
  std::vector<MetricReport> reports;
  std::string predictions;  // CSV lines without header
  std::vector<std::pair<fs::path, std::string>> traces;
};

struct LoadedDataset {
  std::shared_ptr<const Dataset> data;
  SplitAssignment split;
};

LoadedDataset load_entry(const DatasetEntry& entry, const SubSeeds& seeds) {
  const std::uint64_t split_seed = derive_seed(seeds.split, entry.id);
  LoadedDataset out;
  if (entry.toy) {
    ToySpec spec = *entry.toy;
    spec.n_train += entry.toy_n_test;
    auto data = std::make_shared<Dataset>(generate_toy(spec));
    if (entry.split_file) {
      out.split = load_split_file(*entry.split_file, data->num_rows(), entry.train_cap, entry.test_cap);
    } else {
      const auto order = permutation(data->num_rows(), split_seed);
      out.split.seed = split_seed;
      out.split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(entry.toy_n_test));
      out.split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(entry.toy_n_test), order.end());
      std::sort(out.split.test.begin(), out.split.test.end());
      std::sort(out.split.train.begin(), out.split.train.end());
    }
    out.data = std::move(data);
    return out;
  }
  auto data = std::make_shared<Dataset>(load_dataset(entry.table, entry.schema));
  out.split = entry.split_file
                  ? load_split_file(*entry.split_file, data->num_rows(), entry.train_cap, entry.test_cap)
                  : make_split(*data, entry.ratios, split_seed, entry.train_cap, entry.test_cap);
  out.data = std::move(data);
  return out;
}

MetricReport score(const std::string& dataset_id, const std::string& predictor, const Dataset& data,
                   std::span<const PredictionRecord> records, std::size_t train_size,
                   std::size_t context_size, std::string_view policy) {
  MetricReport report;
  report.dataset = dataset_id;
  report.predictor = predictor;
  report.n_test = records.size();
  report.train_size = train_size;
  report.context_size = context_size;
  report.policy = std::string(policy);
  if (data.task() == TaskKind::kClassification) {
    report.metric = MetricKind::kAuroc;
    std::vector<std::size_t> labels;
    std::vector<std::vector<double>> probs;
    for (const auto& r : records) {
      labels.push_back(data.label_class(r.row));
      probs.push_back(r.class_probabilities);
    }
    report.value = auroc(labels, probs, data.num_classes());
  } else {
    report.metric = MetricKind::kNmae;
    std::vector<double> labels;
    std::vector<double> estimates;
    for (const auto& r : records) {
      labels.push_back(data.label_value(r.row));
      estimates.push_back(r.estimate);
    }
    report.value = nmae(labels, estimates);
  }
  return report;
}

std::string prediction_text(const PredictionRecord& r) {
  if (r.task == TaskKind::kRegression) return format_number(r.estimate);
  std::string out;
  for (std::size_t c = 0; c < r.class_probabilities.size(); ++c) {
    if (c > 0) out += '|';
    out += format_number(r.class_probabilities[c]);
  }
  return out;
}

void append_predictions(std::string& out, const std::string& dataset_id, std::size_t train_size,
                        std::size_t context_size, std::string_view policy,
                        std::span<const PredictionRecord> records) {
  for (const auto& r : records) {
    out += csv_line({dataset_id, std::to_string(train_size), std::to_string(context_size),
                     std::string(policy), r.predictor, std::to_string(r.row),
                     std::to_string(r.context_size), prediction_text(r), r.fallback ? "1" : "0"});
  }
}

std::vector<PredictionRecord> run_llm(const PredictorEntry& entry, const LlmClient& client,
                                      const PromptTemplate& tmpl, const ContextPool& pool,
                                      std::span<const std::size_t> test_rows,
                                      std::span<const Query> queries,
                                      std::span<const RetrievedContext> contexts,
                                      std::optional<std::uint64_t> shuffle_seed) {
  const Dataset& data = pool.data();
  std::vector<PromptJob> jobs;
  std::vector<std::optional<PredictionRecord>> failed(test_rows.size());
  std::vector<std::size_t> job_of;
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    try {
      Prompt prompt = build_prompt(tmpl, pool, contexts[i].rows, queries[i], entry.token_budget);
      if (shuffle_seed) {
        // Truncation has already dropped the farthest rows; reordering keeps
        // the length.
        Rng rng(derive_seed(*shuffle_seed, std::to_string(test_rows[i])));
        rng.shuffle(prompt.context_rows);
        prompt.text = serialize_prompt(tmpl, pool, prompt.context_rows, queries[i]);
      }
      PromptJob job;
      job.row = test_rows[i];
      job.context_size = prompt.context_rows.size();
      job.prompt = std::move(prompt.text);
      if (data.task() == TaskKind::kRegression) {
        if (prompt.context_rows.empty()) {
          job.fallback_estimate = pool.label_mean();
        } else {
          double sum = 0.0;
          for (std::size_t r : prompt.context_rows) sum += data.label_value(r);
          job.fallback_estimate = sum / static_cast<double>(prompt.context_rows.size());
        }
      }
      job_of.push_back(i);
      jobs.push_back(std::move(job));
    } catch (const ContractError& e) {
      PredictionRecord rec;
      rec.row = test_rows[i];
      rec.task = data.task();
      rec.predictor = entry.id;
      rec.fallback = true;
      rec.note = e.what();
      if (data.task() == TaskKind::kClassification) {
        rec.class_probabilities = uniform_probabilities(data.num_classes());
      } else {
        rec.estimate = pool.label_mean();
      }
      failed[i] = std::move(rec);
    }
  }
  auto answered = client.predict_batch(jobs, data);
  std::vector<PredictionRecord> out(test_rows.size());
  for (std::size_t k = 0; k < job_of.size(); ++k) out[job_of[k]] = std::move(answered[k]);
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    if (failed[i]) out[i] = std::move(*failed[i]);
  }
  return out;
}

DatasetOutput run_dataset(const RunConfig& cfg, const DatasetEntry& entry, const SubSeeds& seeds) {
  DatasetOutput out;
  out.outcome.id = entry.id;
  const LoadedDataset loaded = load_entry(entry, seeds);
  const Dataset& data = *loaded.data;
  const SplitAssignment& split = loaded.split;
  out.outcome.n_rows = data.num_rows();
  out.outcome.n_train = split.train.size();
  out.outcome.n_test = split.test.size();
  if (split.test.empty()) throw InputError("dataset '" + entry.id + "' has no test rows");

  std::vector<std::size_t> sizes = cfg.train_sizes;
  if (sizes.empty()) sizes.push_back(split.train.size());
  const auto pools = generate_scaling_pools(split.train, sizes, derive_seed(seeds.subset, entry.id));

  // Per-predictor state shared across the sweep.
  std::vector<std::unique_ptr<LlmClient>> clients(cfg.predictors.size());
  std::vector<PromptTemplate> templates(cfg.predictors.size());
  for (std::size_t p = 0; p < cfg.predictors.size(); ++p) {
    const PredictorEntry& pe = cfg.predictors[p];
    if (pe.kind != PredictorKind::kLlm) continue;
    LlmEndpoint endpoint = pe.endpoint;
    endpoint.seed = seeds.llm_jitter;
    clients[p] = std::make_unique<LlmClient>(endpoint, pe.id);
    if (pe.prompt_template) templates[p] = PromptTemplate::from_file(*pe.prompt_template);
    templates[p].anonymize = pe.anonymize;
  }

  for (std::size_t s = 0; s < pools.size(); ++s) {
    const std::size_t train_size = sizes[s];
    PoolOptions options;
    options.numeric_norm = cfg.retrieval.numeric_norm;
    options.norm_overrides = cfg.retrieval.norm_overrides;
    options.pps = cfg.pps;
    options.pps.seed = derive_seed(seeds.pps, entry.id);
    options.pps.threads = cfg.threads;
    if (cfg.retrieval.importance_mode == ImportanceMode::kUniform) {
      // Weights are not used; skip computing them.
      FeatureWeights none;
      for (std::size_t c : data.feature_columns()) none.features.push_back(data.schema()[c].name);
      none.pearson.assign(none.features.size(), 0.0);
      none.pps.assign(none.features.size(), 0.0);
      options.weights = std::move(none);
    }
    const ContextPool pool = ContextPool::build(loaded.data, pools[s], options);

    std::vector<Query> queries;
    queries.reserve(split.test.size());
    for (std::size_t r : split.test) queries.push_back(pool.query_from_row(r));

    for (std::size_t quota : cfg.context_sizes) {
      RetrievalConfig rc = cfg.retrieval;
      rc.quota = quota;
      rc.seed = cfg.seed;
      for (ContextPolicy policy : cfg.policies) {
        std::vector<RetrievedContext> contexts(split.test.size());
        const std::string stream = entry.id + "/" + std::to_string(train_size) + "/" + std::to_string(quota);
        const std::uint64_t random_seed = derive_seed(seeds.random_policy, stream);
        parallel_for(split.test.size(), cfg.threads, [&](std::size_t i) {
          contexts[i] = policy == ContextPolicy::kRag
                            ? retrieve(pool, queries[i], rc)
                            : retrieve_random(pool, quota, derive_seed(random_seed, std::to_string(split.test[i])));
        });
        if (cfg.traces) {
          std::string lines;
          for (std::size_t i = 0; i < contexts.size(); ++i) lines += trace_to_json(split.test[i], contexts[i]) + "\n";
          out.traces.emplace_back(fs::path("traces") / entry.id /
                                      ("train" + std::to_string(train_size) + "_ctx" + std::to_string(quota) +
                                       "_" + std::string(to_string(policy)) + ".jsonl"),
                                  std::move(lines));
        }

        for (std::size_t p = 0; p < cfg.predictors.size(); ++p) {
          const PredictorEntry& pe = cfg.predictors[p];
          std::vector<PredictionRecord> records;
          if (pe.kind == PredictorKind::kKnn) {
            records.resize(split.test.size());
            parallel_for(split.test.size(), cfg.threads, [&](std::size_t i) {
              records[i] = knn_predict(pool, contexts[i], split.test[i]);
              records[i].predictor = pe.id;
            });
          } else if (pe.kind == PredictorKind::kLlm) {
            std::optional<std::uint64_t> shuffle_seed;
            if (cfg.shuffle_context) shuffle_seed = derive_seed(seeds.context_shuffle, stream);
            records = run_llm(pe, *clients[p], templates[p], pool, split.test, queries, contexts, shuffle_seed);
          } else {
            continue;
          }
          out.reports.push_back(score(entry.id, pe.id, data, records, train_size, quota, to_string(policy)));
          append_predictions(out.predictions, entry.id, train_size, quota, to_string(policy), records);
        }
      }
    }
  }

  // External predictions do not depend on the sweep.
  for (const PredictorEntry& pe : cfg.predictors) {
    if (pe.kind != PredictorKind::kExternal) continue;
    const auto it = pe.files.find(entry.id);
    if (it == pe.files.end()) continue;
    auto records = ingest_predictions(it->second, data, split.test, pe.id);
    std::set<std::size_t> covered;
    for (const auto& r : records) covered.insert(r.row);
    if (covered.size() != records.size() || covered.size() != split.test.size()) {
      throw InputError("predictions of '" + pe.id + "' must cover each test row exactly once");
    }
    std::sort(records.begin(), records.end(),
              [](const PredictionRecord& a, const PredictionRecord& b) { return a.row < b.row; });
    out.reports.push_back(score(entry.id, pe.id, data, records, split.train.size(), 0, "external"));
    append_predictions(out.predictions, entry.id, split.train.size(), 0, "external", records);
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunResult run(const RunConfig& cfg) {
  validate(cfg);
  const SubSeeds seeds = sub_seeds(cfg.seed);
  std::vector<DatasetOutput> outputs(cfg.datasets.size());
  parallel_for(cfg.datasets.size(), cfg.workers, [&](std::size_t d) {
    try {
      outputs[d] = run_dataset(cfg, cfg.datasets[d], seeds);
    } catch (const std::exception& e) {
      // Drop partial output so a failing dataset leaves no trace in the
      // shared files.
      outputs[d] = DatasetOutput{};
      outputs[d].outcome.id = cfg.datasets[d].id;
      outputs[d].outcome.ok = false;
      outputs[d].outcome.error = e.what();
    }
  });

  RunResult result;
  result.directory = cfg.output_dir;
  std::string predictions = csv_line({"dataset", "train_size", "context_size", "policy", "predictor",
                                      "row_index", "n_context", "prediction", "fallback"});
  for (auto& o : outputs) {
    result.outcomes.push_back(o.outcome);
    result.reports.insert(result.reports.end(), o.reports.begin(), o.reports.end());
    predictions += o.predictions;
    for (const auto& [path, text] : o.traces) write_text_file(cfg.output_dir / path, text);
    if (!o.outcome.ok) std::cerr << "dataset '" << o.outcome.id << "' failed: " << o.outcome.error << "\n";
  }
  result.fits = fit_scaling(result.reports);

  write_text_file(cfg.output_dir / "predictions.csv", predictions);
  write_text_file(cfg.output_dir / "metrics.json", reports_to_json(result.reports));
  write_text_file(cfg.output_dir / "metrics.csv", reports_to_csv(result.reports));
  write_text_file(cfg.output_dir / "fits.json", fits_to_json(result.fits));

  ojson manifest;
  manifest["tool"] = "tabrag";
  manifest["version"] = std::string(kVersion);
  manifest["created"] = utc_timestamp();
  manifest["seed"] = cfg.seed;
  manifest["sub_seeds"] = {{"split", seeds.split},
                           {"subset", seeds.subset},
                           {"random_policy", seeds.random_policy},
                           {"pps", seeds.pps},
                           {"llm_retry_jitter", seeds.llm_jitter},
                           {"context_shuffle", seeds.context_shuffle}};
  manifest["config"] = ojson::parse(run_config_to_json(cfg));
  manifest["datasets"] = ojson::array();
  for (const auto& o : result.outcomes) {
    ojson d = {{"id", o.id}, {"ok", o.ok}};
    if (o.ok) {
      d["split_seed"] = derive_seed(seeds.split, o.id);
      d["n_rows"] = o.n_rows;
      d["n_train"] = o.n_train;
      d["n_test"] = o.n_test;
    } else {
      d["error"] = o.error;
    }
    manifest["datasets"].push_back(std::move(d));
  }
  manifest["outputs"] = {"predictions.csv", "metrics.json", "metrics.csv", "fits.json"};
  write_text_file(cfg.output_dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

double metric_error(MetricKind metric, double value) {
  return metric == MetricKind::kAuroc ? 1.0 - value : value;
}

std::vector<ScalingFit> fit_scaling(std::span<const MetricReport> reports) {
  using Key = std::tuple<std::string, std::string, std::size_t, MetricKind>;
  std::map<Key, std::map<std::size_t, std::vector<double>>> groups;
  for (const auto& r : reports) {
    if (r.policy == "external" || !r.value) continue;
    groups[{r.predictor, r.policy, r.context_size, r.metric}][r.train_size].push_back(
        metric_error(r.metric, *r.value));
  }
  std::vector<ScalingFit> fits;
  for (auto& [key, by_size] : groups) {
    if (by_size.size() < 2) continue;
    ScalingFit f;
    std::tie(f.predictor, f.policy, f.context_size, f.metric) = key;
    std::vector<std::pair<double, double>> points;
    for (auto& [size, errors] : by_size) {
      std::sort(errors.begin(), errors.end());
      const std::size_t n = errors.size();
      const double median = n % 2 == 1 ? errors[n / 2] : 0.5 * (errors[n / 2 - 1] + errors[n / 2]);
      if (median > 0.0) points.emplace_back(static_cast<double>(size), median);
    }
    if (points.size() >= 2) {
      f.fit = fit_power_law(points);
    } else {
      f.note = "fewer than two training sizes with a positive median error";
    }
    fits.push_back(std::move(f));
  }
  return fits;
}

std::string fits_to_json(std::span<const ScalingFit> fits) {
  ojson doc = ojson::array();
  for (const auto& f : fits) {
    ojson e = {{"predictor", f.predictor},
               {"policy", f.policy},
               {"context_size", f.context_size},
               {"metric", std::string(to_string(f.metric))},
               {"error", f.metric == MetricKind::kAuroc ? "1 - auroc" : "nmae"}};
    e["fit"] = f.fit ? ojson::parse(fit_to_json(*f.fit)) : ojson(nullptr);
    if (!f.note.empty()) e["note"] = f.note;
    doc.push_back(std::move(e));
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// compare

std::vector<MethodScores> methods_from_reports(std::string_view label,
                                               std::span<const MetricReport> reports) {
  std::vector<MethodScores> out;
  // Chosen (train, context) per method and dataset.
  std::map<std::pair<std::size_t, std::string>, std::pair<std::size_t, std::size_t>> chosen;
  const auto method_name = [&](const MetricReport& r) {
    std::string name = r.predictor + "/" + r.policy;
    return label.empty() ? name : std::string(label) + ":" + name;
  };
  for (const auto& r : reports) {
    if (!r.value) continue;
    const std::string name = method_name(r);
    auto it = std::find_if(out.begin(), out.end(), [&](const MethodScores& m) { return m.method == name; });
    if (it == out.end()) {
      out.push_back({name, {}});
      it = out.end() - 1;
    }
    const std::size_t m = static_cast<std::size_t>(it - out.begin());
    const auto key = std::make_pair(m, r.dataset);
    const auto sizes = std::make_pair(r.train_size, r.context_size);
    const auto prev = chosen.find(key);
    if (prev == chosen.end() || sizes > prev->second) {
      chosen[key] = sizes;
      it->by_dataset[r.dataset] = {r.metric, *r.value};
    }
  }
  return out;
}

Comparison compare(std::span<const MethodScores> methods, std::size_t a, std::size_t b) {
  if (a >= methods.size() || b >= methods.size()) throw ContractError("no such method");
  Comparison c;
  c.method_a = methods[a].method;
  c.method_b = methods[b].method;
  for (const auto& [dataset, sa] : methods[a].by_dataset) {
    const auto it = methods[b].by_dataset.find(dataset);
    if (it == methods[b].by_dataset.end()) continue;
    const DatasetScore& sb = it->second;
    if (sa.metric != sb.metric) throw InputError("dataset '" + dataset + "' uses different metrics");
    GapRow row{dataset, sa.value, sb.value, 0.0};
    row.gap = sa.metric == MetricKind::kAuroc ? sa.value - sb.value : sb.value - sa.value;
    c.gaps.push_back(row);
  }
  if (c.gaps.empty()) {
    throw InputError("'" + c.method_a + "' and '" + c.method_b + "' share no dataset");
  }
  std::stable_sort(c.gaps.begin(), c.gaps.end(),
                   [](const GapRow& x, const GapRow& y) { return x.gap > y.gap; });
  std::size_t a_wins = 0;
  std::size_t b_wins = 0;
  for (const auto& g : c.gaps) {
    if (g.gap > 0.0) ++a_wins;
    if (g.gap < 0.0) ++b_wins;
  }
  const double n = static_cast<double>(c.gaps.size());
  c.fraction_a_better = static_cast<double>(a_wins) / n;
  c.fraction_b_better = static_cast<double>(b_wins) / n;

  for (const auto& m : methods) c.methods.push_back(m.method);
  for (const auto& g : c.gaps) c.datasets.push_back(g.dataset);
  std::sort(c.datasets.begin(), c.datasets.end());
  for (const auto& dataset : c.datasets) {
    const MetricKind metric = methods[a].by_dataset.at(dataset).metric;
    std::vector<double> values;
    std::vector<std::size_t> present;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto it = methods[m].by_dataset.find(dataset);
      if (it == methods[m].by_dataset.end() || it->second.metric != metric) continue;
      values.push_back(it->second.value);
      present.push_back(m);
    }
    const auto scaled = minmax_normalize(
        values, metric == MetricKind::kAuroc ? Orientation::kHigherBetter : Orientation::kLowerBetter);
    std::vector<double> row(methods.size(), std::nan(""));
    for (std::size_t k = 0; k < present.size(); ++k) row[present[k]] = scaled[k];
    c.normalized.push_back(std::move(row));
  }
  return c;
}

std::string comparison_to_json(const Comparison& c) {
  ojson doc;
  doc["method_a"] = c.method_a;
  doc["method_b"] = c.method_b;
  doc["n_datasets"] = c.gaps.size();
  doc["fraction_a_better"] = c.fraction_a_better;
  doc["fraction_b_better"] = c.fraction_b_better;
  doc["gaps"] = ojson::array();
  for (const auto& g : c.gaps) {
    doc["gaps"].push_back({{"dataset", g.dataset}, {"a", g.a}, {"b", g.b}, {"gap", g.gap}});
  }
  doc["normalized"] = ojson::object();
  for (std::size_t d = 0; d < c.datasets.size(); ++d) {
    ojson row = ojson::object();
    for (std::size_t m = 0; m < c.methods.size(); ++m) {
      row[c.methods[m]] = std::isnan(c.normalized[d][m]) ? ojson(nullptr) : ojson(c.normalized[d][m]);
    }
    doc["normalized"][c.datasets[d]] = std::move(row);
  }
  return doc.dump(2) + "\n";
}

std::string gap_table_csv(const Comparison& c) {
  std::string out = csv_line({"dataset", c.method_a, c.method_b, "gap"});
  for (const auto& g : c.gaps) {
    out += csv_line({g.dataset, format_number(g.a), format_number(g.b), format_number(g.gap)});
  }
  return out;
}

std::string normalized_table_csv(const Comparison& c) {
  CsvRecord header{"dataset"};
  header.insert(header.end(), c.methods.begin(), c.methods.end());
  std::string out = csv_line(header);
  for (std::size_t d = 0; d < c.datasets.size(); ++d) {
    CsvRecord row{c.datasets[d]};
    for (double v : c.normalized[d]) row.push_back(format_number(v));
    out += csv_line(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ablate / scaling

std::vector<AblationVariant> ablation_variants(const RunConfig& base) {
  std::vector<AblationVariant> out;
  const auto add = [&](std::string name, auto&& edit) {
    RunConfig cfg = base;
    cfg.output_dir = base.output_dir / name;
    edit(cfg.retrieval);
    out.push_back({std::move(name), std::move(cfg)});
  };
  add("full", [](RetrievalConfig&) {});
  add("NoFeatImp", [](RetrievalConfig& r) { r.importance_mode = ImportanceMode::kUniform; });
  add("NoNorm", [](RetrievalConfig& r) {
    r.numeric_norm = NormMode::kNone;
    r.norm_overrides.clear();
    r.distance_minmax_rescale = false;
  });
  add("NoCorr", [](RetrievalConfig& r) { r.importance_mode = ImportanceMode::kPpsOnly; });
  add("NoPPS", [](RetrievalConfig& r) { r.importance_mode = ImportanceMode::kPearsonOnly; });
  return out;
}

AblationResult ablate(const RunConfig& base) {
  validate(base);
  AblationResult result;
  result.variants = ablation_variants(base);
  std::vector<MethodScores> methods;
  std::optional<std::size_t> full;
  std::optional<std::size_t> no_feat_imp;
  for (const auto& v : result.variants) {
    result.runs.push_back(run(v.config));
    for (auto& m : methods_from_reports(v.name, result.runs.back().reports)) {
      if (v.name == "full" && !full) full = methods.size();
      if (v.name == "NoFeatImp" && !no_feat_imp) no_feat_imp = methods.size();
      methods.push_back(std::move(m));
    }
  }
  if (!full || !no_feat_imp) throw InputError("ablation produced no scores to compare");
  result.table = compare(methods, *full, *no_feat_imp);
  write_text_file(base.output_dir / "ablation.json", comparison_to_json(result.table));
  write_text_file(base.output_dir / "ablation.csv", normalized_table_csv(result.table));
  return result;
}

RunResult scaling(RunConfig cfg) {
  if (cfg.train_sizes.size() < 2) throw InputError("scaling needs at least two train_sizes");
  cfg.policies = {ContextPolicy::kRag, ContextPolicy::kRandom};
  return run(cfg);
}

}  // namespace tabrag
