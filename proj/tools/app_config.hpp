#pragma once

// JSON configuration for the CLI and construction of the pipeline
// collaborators it describes.

#include <memory>
#include <optional>
#include <string>

#include "graph_anchor/llm_client.hpp"
#include "graph_anchor/orchestrator.hpp"
#include "graph_anchor/retrieval.hpp"
#include "graph_anchor/tag_protocol.hpp"

namespace graph_anchor::cli {

enum class LlmBackend { Http, Scripted, Echo };
enum class RetrieverBackend { Bm25, Embedding };

struct LlmSettings {
  LlmBackend backend = LlmBackend::Echo;
  std::string endpoint;
  std::string model;
  std::string fixture_path;
  int timeout_seconds = 120;
};

struct RetrieverSettings {
  RetrieverBackend backend = RetrieverBackend::Bm25;
  std::string endpoint;
  std::string model;
  std::string vectors_path;
};

/// Example:
///   {
///     "corpus_path": "corpus.jsonl",
///     "template_dir": "templates",
///     "llm": {"backend": "http", "endpoint": "http://localhost:8000/v1", "model": "qwen2.5-7b"},
///     "pipeline": {"max_steps": 4, "top_k": 5, "mode": "graph_anchor", "parse_retry_limit": 2},
///     "output_dir": "out"
///   }
/// Relative paths resolve against the directory holding the config file.
struct AppConfig {
  std::string corpus_path;
  std::string index_path;  // optional prebuilt index from `ingest`
  std::string template_dir;
  LlmSettings llm;
  RetrieverSettings retriever;
  PipelineConfig pipeline;
  std::string output_dir = "out";
};

/// Throws Error(InvalidConfig) for schema problems or missing paths.
AppConfig load_app_config(const std::string& path);

/// Everything a pipeline run needs, owned in one place.
struct Runtime {
  std::shared_ptr<const CorpusIndex> index;
  std::unique_ptr<Retriever> retriever;
  std::unique_ptr<LanguageModel> llm;
  TemplateSet templates;

  [[nodiscard]] PipelineDeps deps() { return PipelineDeps{*retriever, *llm, templates}; }
};

Runtime build_runtime(const AppConfig& config);

}  // namespace graph_anchor::cli
