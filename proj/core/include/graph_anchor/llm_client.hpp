#pragma once

// Text generation backends. Every model turn in the pipeline goes through
// LanguageModel::generate, so the same pipeline can talk to a chat-completion
// server, replay recorded fixtures, or run against a canned echo response.

#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "graph_anchor/json_fwd.hpp"

namespace graph_anchor {

inline constexpr int kDefaultStepMaxTokens = 1024;
inline constexpr int kDefaultAnswerMaxTokens = 256;

struct GenerationRequest {
  std::string prompt;
  int max_new_tokens = kDefaultStepMaxTokens;
  double temperature = 0.0;
  std::vector<std::string> stop_sequences;
  std::string request_tag;

  /// Throws Error(InvalidConfig) on an empty prompt, max_new_tokens < 1 or a
  /// negative temperature.
  void validate() const;
};

struct GenerationResponse {
  std::string text;
  std::int64_t prompt_token_estimate = 0;  // whitespace-token counts
  std::int64_t completion_token_estimate = 0;
  std::int64_t latency_ms = 0;
};

class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  [[nodiscard]] virtual GenerationResponse generate(const GenerationRequest& request) = 0;
};

/// Backoff applied to HTTP 429 responses: up to `max_retries` retries with
/// delays initial, initial*multiplier, ... (1s, 2s, 4s by default).
struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_delay{1000};
  double multiplier = 2.0;

  [[nodiscard]] std::chrono::milliseconds delay_for(int retry) const;  // retry is 0-based
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct HttpBackendConfig {
  std::string endpoint;  // e.g. http://localhost:8000/v1
  std::string model;
  std::string api_key;   // usually from GRAPH_ANCHOR_API_KEY
  std::chrono::milliseconds timeout{120000};
  RetryPolicy retry;
};

inline constexpr const char* kApiKeyEnvVar = "GRAPH_ANCHOR_API_KEY";

/// Reads GRAPH_ANCHOR_API_KEY, empty when unset.
std::string api_key_from_env();

/// POST {endpoint}/chat/completions with a single user message; returns
/// choices[0].message.content. Errors: Transport, RemoteStatus, RateLimited.
class HttpChatBackend final : public LanguageModel {
 public:
  explicit HttpChatBackend(HttpBackendConfig config, Sleeper sleeper = {});

  [[nodiscard]] GenerationResponse generate(const GenerationRequest& request) override;

  /// The JSON body sent for a request (exposed for tests).
  [[nodiscard]] std::string request_body(const GenerationRequest& request) const;

 private:
  HttpBackendConfig config_;
  Sleeper sleeper_;
};

struct Fixture {
  std::optional<std::string> tag;
  std::string text;
};

/// Replays fixture responses. A tagged fixture serves requests whose tag is
/// equal to it or starts with "<tag>:"; untagged fixtures serve any request in
/// file order. Tagged matches are preferred. Throws Error(FixtureExhausted).
class ScriptedBackend final : public LanguageModel {
 public:
  explicit ScriptedBackend(std::vector<Fixture> fixtures);

  /// Fixture file: JSON array of {"tag": optional string, "text": string}.
  static std::vector<Fixture> fixtures_from_json(const Json& j);
  static std::vector<Fixture> load_fixtures(const std::string& path);

  [[nodiscard]] GenerationResponse generate(const GenerationRequest& request) override;

  [[nodiscard]] std::size_t calls() const;
  [[nodiscard]] std::size_t remaining() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Fixture> fixtures_;
  std::vector<bool> used_;
  std::size_t calls_ = 0;
};

/// Always answers with the same well-formed response: an empty graph, a
/// sufficient judgement, empty notes and a placeholder answer.
class EchoBackend final : public LanguageModel {
 public:
  static constexpr std::string_view kResponse =
      "<graph>\nEntities:\nRelations:\n</graph>\n"
      "<notes></notes>\n"
      "<think>echo backend</think>\n"
      "<judgement>sufficient</judgement>\n"
      "<answer>echo</answer>";

  [[nodiscard]] GenerationResponse generate(const GenerationRequest& request) override;
};

}  // namespace graph_anchor
