#include "tabrag/llm_client.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "tabrag/error.hpp"
#include "tabrag/parallel.hpp"
#include "tabrag/random.hpp"
#include "tabrag/text.hpp"

namespace tabrag {

using nlohmann::json;

std::string LlmEndpoint::request_path() const {
  if (!path.empty()) return path;
  return style == ApiStyle::kChat ? "/v1/chat/completions" : "/v1/completions";
}

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::string strip_punctuation(std::string_view text) {
  text = trim(text);
  while (!text.empty() && std::ispunct(static_cast<unsigned char>(text.back())) != 0) {
    text.remove_suffix(1);
  }
  while (!text.empty() && (text.front() == '"' || text.front() == '\'')) text.remove_prefix(1);
  return std::string(trim(text));
}

// Occurs in `haystack` with no word characters on either side.
bool contains_word(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return false;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok = end >= haystack.size() || !is_word_char(haystack[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

}  // namespace

std::optional<std::size_t> match_class(std::string_view completion,
                                       std::span<const std::string> class_labels) {
  const std::string answer = to_lower(strip_punctuation(completion));
  for (std::size_t c = 0; c < class_labels.size(); ++c) {
    if (answer == to_lower(trim(class_labels[c]))) return c;
  }
  const std::string lowered = to_lower(completion);
  std::optional<std::size_t> found;
  for (std::size_t c = 0; c < class_labels.size(); ++c) {
    if (contains_word(lowered, to_lower(trim(class_labels[c])))) {
      if (found) return std::nullopt;  // ambiguous
      found = c;
    }
  }
  return found;
}

std::optional<double> parse_first_number(std::string_view text) {
  static const std::regex number(R"([-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, number)) return std::nullopt;
  return parse_number(std::string_view(&*m[0].first, static_cast<std::size_t>(m[0].length())));
}

std::optional<std::vector<double>> class_probabilities_from_logprobs(
    std::span<const TokenLogprob> alternatives, std::span<const std::string> class_labels) {
  std::vector<double> probs(class_labels.size(), 0.0);
  double total = 0.0;
  for (const auto& alt : alternatives) {
    const std::string token = to_lower(trim(alt.token));
    if (token.empty()) continue;
    std::optional<std::size_t> owner;
    bool ambiguous = false;
    for (std::size_t c = 0; c < class_labels.size(); ++c) {
      if (to_lower(class_labels[c]).rfind(token, 0) == 0) {
        if (owner) ambiguous = true;
        owner = c;
      }
    }
    if (!owner || ambiguous) continue;
    const double p = std::exp(alt.logprob);
    probs[*owner] += p;
    total += p;
  }
  if (!(total > 0.0)) return std::nullopt;
  for (double& p : probs) p /= total;
  return probs;
}

std::string build_request_body(const LlmEndpoint& endpoint, std::string_view prompt) {
  json body;
  body["model"] = endpoint.model;
  body["temperature"] = 0;
  body["max_tokens"] = endpoint.max_output_tokens;
  if (endpoint.style == ApiStyle::kChat) {
    body["messages"] = json::array({{{"role", "user"}, {"content", std::string(prompt)}}});
    if (endpoint.request_logprobs) {
      body["logprobs"] = true;
      body["top_logprobs"] = endpoint.top_logprobs;
    }
  } else {
    body["prompt"] = std::string(prompt);
    if (endpoint.request_logprobs) body["logprobs"] = endpoint.top_logprobs;
  }
  return body.dump();
}

Completion parse_response_body(const LlmEndpoint& endpoint, std::string_view body) {
  Completion out;
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("endpoint returned invalid JSON: ") + e.what());
  }
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw TransportError("endpoint response has no choices");
  }
  const json& choice = doc["choices"][0];
  if (endpoint.style == ApiStyle::kChat) {
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      out.text = choice["message"]["content"].get<std::string>();
    }
    // {"logprobs": {"content": [{"token", "logprob", "top_logprobs": [...]}]}}
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array() &&
        !choice["logprobs"]["content"].empty()) {
      const json& first = choice["logprobs"]["content"][0];
      if (first.contains("top_logprobs") && first["top_logprobs"].is_array()) {
        for (const auto& alt : first["top_logprobs"]) {
          out.first_token_alternatives.push_back(
              {alt.value("token", std::string()), alt.value("logprob", -INFINITY)});
        }
      }
    }
  } else {
    if (choice.contains("text") && choice["text"].is_string()) {
      out.text = choice["text"].get<std::string>();
    }
    // {"logprobs": {"top_logprobs": [{token: logprob, ...}, ...]}}
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("top_logprobs") &&
        choice["logprobs"]["top_logprobs"].is_array() &&
        !choice["logprobs"]["top_logprobs"].empty()) {
      for (const auto& [token, lp] : choice["logprobs"]["top_logprobs"][0].items()) {
        out.first_token_alternatives.push_back({token, lp.get<double>()});
      }
    }
  }
  return out;
}

LlmClient::LlmClient(LlmEndpoint endpoint, std::string predictor_id)
    : endpoint_(std::move(endpoint)), predictor_id_(std::move(predictor_id)) {
  if (endpoint_.max_in_flight == 0) throw ContractError("max_in_flight must be at least 1");
  if (!endpoint_.api_key_env.empty()) {
    if (const char* key = std::getenv(endpoint_.api_key_env.c_str())) api_key_ = key;
  }
}

Completion LlmClient::complete(std::string_view prompt) const {
  const std::string body = build_request_body(endpoint_, prompt);
  const std::string path = endpoint_.request_path();
  Rng jitter(derive_seed(endpoint_.seed, "llm-retry-jitter"));

  std::string last_error;
  for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double wait = endpoint_.backoff_seconds * std::pow(2.0, attempt - 1) *
                          (1.0 + 0.25 * jitter.uniform());
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    httplib::Client client(endpoint_.base_url);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(endpoint_.timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto result = client.Post(path, headers, body, "application/json");
    if (!result) {
      last_error = "request failed: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status == 429 || status >= 500) {
      last_error = "HTTP " + std::to_string(status);
      continue;
    }
    if (status < 200 || status >= 300) {
      throw TransportError("endpoint rejected the request: HTTP " + std::to_string(status));
    }
    return parse_response_body(endpoint_, result->body);
  }
  throw TransportError("giving up after " + std::to_string(endpoint_.max_retries + 1) +
                       " attempts: " + last_error);
}

PredictionRecord LlmClient::predict(const PromptJob& job, const Dataset& data) const {
  PredictionRecord rec;
  rec.row = job.row;
  rec.task = data.task();
  rec.predictor = predictor_id_;
  rec.context_size = job.context_size;
  const bool classification = data.task() == TaskKind::kClassification;

  const auto fall_back = [&](std::string note) {
    rec.fallback = true;
    rec.note = std::move(note);
    if (classification) {
      rec.class_probabilities = uniform_probabilities(data.num_classes());
    } else {
      rec.estimate = job.fallback_estimate;
    }
    return rec;
  };

  try {
    if (classification) {
      const auto& labels = data.class_labels();
      for (int attempt = 0; attempt < 2; ++attempt) {
        const Completion completion = complete(job.prompt);
        if (endpoint_.request_logprobs) {
          if (auto probs = class_probabilities_from_logprobs(completion.first_token_alternatives, labels)) {
            rec.class_probabilities = std::move(*probs);
            return rec;
          }
        }
        if (auto cls = match_class(completion.text, labels)) {
          rec.class_probabilities.assign(labels.size(), 0.0);
          rec.class_probabilities[*cls] = 1.0;
          return rec;
        }
      }
      return fall_back("parse failure: no class label in completion");
    }
    const Completion completion = complete(job.prompt);
    if (auto value = parse_first_number(completion.text)) {
      rec.estimate = *value;
      return rec;
    }
    return fall_back("parse failure: no number in completion");
  } catch (const TransportError& e) {
    return fall_back(std::string("transport error: ") + e.what());
  }
}

std::vector<PredictionRecord> LlmClient::predict_batch(std::span<const PromptJob> jobs,
                                                       const Dataset& data) const {
  std::vector<PredictionRecord> out(jobs.size());
  parallel_for(jobs.size(), endpoint_.max_in_flight,
               [&](std::size_t i) { out[i] = predict(jobs[i], data); });
  return out;
}

}  // namespace tabrag
