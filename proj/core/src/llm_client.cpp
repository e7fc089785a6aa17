#include "graph_anchor/llm_client.hpp"

#include <cmath>
#include <cstdlib>
#include <nlohmann/json.hpp>

#include "graph_anchor/error.hpp"
#include "text_util.hpp"

namespace graph_anchor {

void GenerationRequest::validate() const {
  if (prompt.empty()) throw Error(ErrorCode::InvalidConfig, "generation prompt is empty");
  if (max_new_tokens < 1) throw Error(ErrorCode::InvalidConfig, "max_new_tokens must be >= 1");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidConfig, "temperature must be >= 0");
}

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
  const double scaled = static_cast<double>(initial_delay.count()) * std::pow(multiplier, retry);
  return std::chrono::milliseconds(static_cast<std::int64_t>(scaled));
}

std::string api_key_from_env() {
  const char* value = std::getenv(kApiKeyEnvVar);
  return value ? std::string(value) : std::string{};
}

// --- ScriptedBackend -------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<Fixture> fixtures)
    : fixtures_(std::move(fixtures)), used_(fixtures_.size(), false) {}

std::vector<Fixture> ScriptedBackend::fixtures_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidConfig, "fixture file must be a JSON array");
  std::vector<Fixture> fixtures;
  std::size_t n = 0;
  for (const auto& item : j) {
    ++n;
    if (!item.is_object() || !item.contains("text") || !item.at("text").is_string()) {
      throw Error(ErrorCode::InvalidConfig, "fixture " + std::to_string(n) + " needs a string \"text\"");
    }
    Fixture f;
    f.text = item.at("text").get<std::string>();
    if (auto it = item.find("tag"); it != item.end() && !it->is_null()) {
      if (!it->is_string()) {
        throw Error(ErrorCode::InvalidConfig, "fixture " + std::to_string(n) + " has a non-string tag");
      }
      f.tag = it->get<std::string>();
    }
    fixtures.push_back(std::move(f));
  }
  return fixtures;
}

std::vector<Fixture> ScriptedBackend::load_fixtures(const std::string& path) {
  auto text = detail::read_file(path);
  try {
    return fixtures_from_json(Json::parse(text));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "bad fixture file " + path + ": " + e.what());
  }
}

namespace {

bool tag_matches(const std::string& fixture_tag, std::string_view request_tag) {
  if (request_tag == fixture_tag) return true;
  return request_tag.size() > fixture_tag.size() && request_tag.starts_with(fixture_tag) &&
         request_tag[fixture_tag.size()] == ':';
}

}  // namespace

GenerationResponse ScriptedBackend::generate(const GenerationRequest& request) {
  request.validate();
  std::lock_guard lock(mutex_);
  ++calls_;
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < fixtures_.size() && !pick; ++i) {
    if (!used_[i] && fixtures_[i].tag && tag_matches(*fixtures_[i].tag, request.request_tag)) pick = i;
  }
  for (std::size_t i = 0; i < fixtures_.size() && !pick; ++i) {
    if (!used_[i] && !fixtures_[i].tag) pick = i;
  }
  if (!pick) {
    throw Error(ErrorCode::FixtureExhausted,
                "no fixture left for request '" + request.request_tag + "'");
  }
  used_[*pick] = true;
  GenerationResponse r;
  r.text = fixtures_[*pick].text;
  r.prompt_token_estimate = static_cast<std::int64_t>(detail::whitespace_token_count(request.prompt));
  r.completion_token_estimate = static_cast<std::int64_t>(detail::whitespace_token_count(r.text));
  return r;
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t ScriptedBackend::remaining() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (bool u : used_) n += u ? 0 : 1;
  return n;
}

// --- EchoBackend -----------------------------------------------------------

GenerationResponse EchoBackend::generate(const GenerationRequest& request) {
  request.validate();
  GenerationResponse r;
  r.text = std::string(kResponse);
  r.prompt_token_estimate = static_cast<std::int64_t>(detail::whitespace_token_count(request.prompt));
  r.completion_token_estimate = static_cast<std::int64_t>(detail::whitespace_token_count(r.text));
  return r;
}

}  // namespace graph_anchor
