#include "app_config.hpp"

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "graph_anchor/error.hpp"

namespace graph_anchor::cli {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  return path.is_absolute() ? path.string() : (base / path).lexically_normal().string();
}

void require_exists(const std::string& path, const char* what) {
  if (!fs::exists(path)) bad(std::string(what) + " not found: " + path);
}

std::string str(const Json& j, const char* key, std::string fallback = {}) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_string()) bad(std::string("\"") + key + "\" must be a string");
  return it->get<std::string>();
}

int integer(const Json& j, const char* key, int fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer()) bad(std::string("\"") + key + "\" must be an integer");
  return it->get<int>();
}

}  // namespace

AppConfig load_app_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("config file not found: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    bad("config " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) bad("config must be a JSON object");
  const fs::path base = fs::absolute(path).parent_path();

  AppConfig c;
  c.corpus_path = resolve(base, str(j, "corpus_path"));
  c.index_path = resolve(base, str(j, "index_path"));
  c.template_dir = resolve(base, str(j, "template_dir"));
  c.output_dir = resolve(base, str(j, "output_dir", "out"));
  if (c.corpus_path.empty() && c.index_path.empty()) bad("config needs corpus_path or index_path");
  if (!c.index_path.empty()) require_exists(c.index_path, "index_path");
  else require_exists(c.corpus_path, "corpus_path");
  if (!c.template_dir.empty()) require_exists(c.template_dir, "template_dir");

  const Json llm = j.value("llm", Json::object());
  const auto backend = str(llm, "backend", "echo");
  if (backend == "http") {
    c.llm.backend = LlmBackend::Http;
    c.llm.endpoint = str(llm, "endpoint");
    c.llm.model = str(llm, "model");
    if (c.llm.endpoint.empty()) bad("llm.endpoint is required for the http backend");
    if (c.llm.model.empty()) bad("llm.model is required for the http backend");
  } else if (backend == "scripted") {
    c.llm.backend = LlmBackend::Scripted;
    c.llm.fixture_path = resolve(base, str(llm, "fixture_path"));
    if (c.llm.fixture_path.empty()) bad("llm.fixture_path is required for the scripted backend");
    require_exists(c.llm.fixture_path, "llm.fixture_path");
  } else if (backend == "echo") {
    c.llm.backend = LlmBackend::Echo;
  } else {
    bad("unknown llm.backend '" + backend + "' (expected http, scripted or echo)");
  }
  c.llm.timeout_seconds = integer(llm, "timeout_seconds", 120);

  const Json retriever = j.value("retriever", Json::object());
  const auto rb = str(retriever, "backend", "bm25");
  if (rb == "bm25") {
    c.retriever.backend = RetrieverBackend::Bm25;
  } else if (rb == "embedding") {
    c.retriever.backend = RetrieverBackend::Embedding;
    c.retriever.endpoint = str(retriever, "endpoint");
    c.retriever.model = str(retriever, "model");
    c.retriever.vectors_path = resolve(base, str(retriever, "vectors_path"));
    if (c.retriever.endpoint.empty()) bad("retriever.endpoint is required for the embedding backend");
    require_exists(c.retriever.vectors_path, "retriever.vectors_path");
  } else {
    bad("unknown retriever.backend '" + rb + "' (expected bm25 or embedding)");
  }

  const Json p = j.value("pipeline", Json::object());
  c.pipeline.max_steps = integer(p, "max_steps", c.pipeline.max_steps);
  c.pipeline.top_k = integer(p, "top_k", c.pipeline.top_k);
  c.pipeline.parse_retry_limit = integer(p, "parse_retry_limit", c.pipeline.parse_retry_limit);
  c.pipeline.step_max_tokens = integer(p, "step_max_tokens", c.pipeline.step_max_tokens);
  c.pipeline.answer_max_tokens = integer(p, "answer_max_tokens", c.pipeline.answer_max_tokens);
  if (auto it = p.find("temperature"); it != p.end()) {
    if (!it->is_number()) bad("\"temperature\" must be a number");
    c.pipeline.temperature = it->get<double>();
  }
  const auto mode = str(p, "mode", "graph_anchor");
  auto parsed = parse_pipeline_mode(mode);
  if (!parsed) bad("unknown pipeline.mode '" + mode + "'");
  c.pipeline.mode = *parsed;
  c.pipeline.validate();
  return c;
}

Runtime build_runtime(const AppConfig& config) {
  Runtime rt;
  rt.index = std::make_shared<const CorpusIndex>(
      config.index_path.empty() ? CorpusIndex::ingest_file(config.corpus_path)
                                : CorpusIndex::load(config.index_path));

  if (config.retriever.backend == RetrieverBackend::Bm25) {
    rt.retriever = std::make_unique<Bm25Retriever>(rt.index);
  } else {
    std::ifstream sidecar(config.retriever.vectors_path, std::ios::binary);
    auto vectors = EmbeddingRetriever::load_vectors(sidecar);
    auto embedder = std::make_shared<const HttpEmbedder>(config.retriever.endpoint,
                                                         config.retriever.model, api_key_from_env());
    rt.retriever = std::make_unique<EmbeddingRetriever>(rt.index, embedder, std::move(vectors));
  }

  switch (config.llm.backend) {
    case LlmBackend::Http: {
      HttpBackendConfig http;
      http.endpoint = config.llm.endpoint;
      http.model = config.llm.model;
      http.api_key = api_key_from_env();
      http.timeout = std::chrono::seconds(config.llm.timeout_seconds);
      rt.llm = std::make_unique<HttpChatBackend>(std::move(http));
      break;
    }
    case LlmBackend::Scripted:
      rt.llm = std::make_unique<ScriptedBackend>(ScriptedBackend::load_fixtures(config.llm.fixture_path));
      break;
    case LlmBackend::Echo:
      rt.llm = std::make_unique<EchoBackend>();
      break;
  }

  rt.templates = config.template_dir.empty() ? TemplateSet::defaults()
                                             : TemplateSet::load_dir(config.template_dir);
  return rt;
}

}  // namespace graph_anchor::cli
