#include <nlohmann/json.hpp>
#include <thread>

#include "graph_anchor/error.hpp"
#include "graph_anchor/llm_client.hpp"
#include "http_util.hpp"
#include "text_util.hpp"

namespace graph_anchor {

namespace {

std::string excerpt(const std::string& body) {
  constexpr std::size_t kMax = 300;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

}  // namespace

HttpChatBackend::HttpChatBackend(HttpBackendConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
  if (config_.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "HTTP backend needs an endpoint");
  detail::parse_endpoint(config_.endpoint);
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::string HttpChatBackend::request_body(const GenerationRequest& request) const {
  Json body{{"model", config_.model},
            {"messages", Json::array({Json{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_new_tokens}};
  if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
  return body.dump(-1, ' ', false, Json::error_handler_t::replace);
}

GenerationResponse HttpChatBackend::generate(const GenerationRequest& request) {
  request.validate();
  const auto endpoint = detail::parse_endpoint(config_.endpoint);
  const auto body = request_body(request);
  const auto started = std::chrono::steady_clock::now();

  for (int attempt = 0;; ++attempt) {
    auto reply = detail::post_json(endpoint, "/chat/completions", body, config_.api_key,
                                   config_.timeout);
    if (reply.status == 429) {
      if (attempt >= config_.retry.max_retries) {
        throw Error(ErrorCode::RateLimited, "rate limited after " + std::to_string(attempt + 1) +
                                                " attempts: " + excerpt(reply.body));
      }
      sleeper_(config_.retry.delay_for(attempt));
      continue;
    }
    if (reply.status < 200 || reply.status >= 300) {
      throw Error(ErrorCode::RemoteStatus,
                  "HTTP " + std::to_string(reply.status) + ": " + excerpt(reply.body));
    }
    GenerationResponse r;
    try {
      auto j = Json::parse(reply.body);
      r.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::RemoteStatus,
                  std::string("unexpected chat-completion response (") + e.what() + "): " +
                      excerpt(reply.body));
    }
    r.prompt_token_estimate = static_cast<std::int64_t>(detail::whitespace_token_count(request.prompt));
    r.completion_token_estimate = static_cast<std::int64_t>(detail::whitespace_token_count(r.text));
    r.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    return r;
  }
}

}  // namespace graph_anchor
