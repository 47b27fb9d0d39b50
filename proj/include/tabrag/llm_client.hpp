#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabrag/dataset.hpp"
#include "tabrag/predictors.hpp"

namespace tabrag {

enum class ApiStyle { kChat, kCompletion };

struct LlmEndpoint {
  // scheme://host[:port]; https needs a build with OpenSSL.
  std::string base_url = "http://127.0.0.1:8000";
  std::string path;  // empty: /v1/chat/completions or /v1/completions
  std::string model;
  ApiStyle style = ApiStyle::kChat;
  // Name of the environment variable holding the API key (sent as a
  // bearer token when set).
  std::string api_key_env = "OPENAI_API_KEY";
  int max_output_tokens = 16;
  double timeout_seconds = 60.0;
  // Extra attempts after a transport failure (connection error, 429, 5xx).
  int max_retries = 2;
  double backoff_seconds = 0.5;
  std::size_t max_in_flight = 4;
  // Ask for token logprobs and turn them into class probabilities when the
  // endpoint provides them.
  bool request_logprobs = false;
  int top_logprobs = 5;
  std::uint64_t seed = 0;

  std::string request_path() const;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

struct Completion {
  std::string text;
  // Alternatives for the first generated token, when requested and present.
  std::vector<TokenLogprob> first_token_alternatives;
};

// Index of the class label the completion names, compared
// case-insensitively: first the whole trimmed completion (ignoring trailing
// punctuation), then a unique label occurring as a separate word.
std::optional<std::size_t> match_class(std::string_view completion,
                                       std::span<const std::string> class_labels);

// First decimal number in the text ("The value is 42.5" -> 42.5).
std::optional<double> parse_first_number(std::string_view text);

// Class distribution from first-token alternatives: each alternative counts
// for the single class whose label starts with it (case-insensitive).
std::optional<std::vector<double>> class_probabilities_from_logprobs(
    std::span<const TokenLogprob> alternatives, std::span<const std::string> class_labels);

std::string build_request_body(const LlmEndpoint& endpoint, std::string_view prompt);
Completion parse_response_body(const LlmEndpoint& endpoint, std::string_view body);

struct PromptJob {
  std::size_t row = 0;
  std::string prompt;
  std::size_t context_size = 0;
  // Regression fallback (context label mean).
  double fallback_estimate = 0.0;
};

class LlmClient {
 public:
  explicit LlmClient(LlmEndpoint endpoint, std::string predictor_id = "llm");

  const LlmEndpoint& endpoint() const { return endpoint_; }

  // One request with bounded retries; throws TransportError when they are
  // exhausted or the endpoint rejects the request.
  Completion complete(std::string_view prompt) const;

  // Never throws for endpoint problems: failures become flagged fallback
  // records. Classification retries once when no class matches.
  PredictionRecord predict(const PromptJob& job, const Dataset& data) const;

  // Runs jobs with at most endpoint().max_in_flight concurrent requests;
  // output order matches input order.
  std::vector<PredictionRecord> predict_batch(std::span<const PromptJob> jobs,
                                              const Dataset& data) const;

 private:
  LlmEndpoint endpoint_;
  std::string predictor_id_;
  std::string api_key_;
};

}  // namespace tabrag
