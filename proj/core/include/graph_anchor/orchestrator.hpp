#pragma once

// The iterative retrieve / index / judge loop and the final answer turn.
//
// Per step t the pipeline retrieves D_t for the current query (the question
// itself at t = 1), asks the model for the updated index, its reasoning and a
// sufficiency judgement in a single turn, and stops on "sufficient" or after
// max_steps. The answer turn sees the union of all retrieved documents plus
// the final index.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graph_anchor/dataset.hpp"
#include "graph_anchor/graph_index.hpp"
#include "graph_anchor/llm_client.hpp"
#include "graph_anchor/retrieval.hpp"
#include "graph_anchor/tag_protocol.hpp"

namespace graph_anchor {

enum class PipelineMode {
  GraphAnchor,  // evolving graph index, answer from docs + graph
  TextIndex,    // free-text <notes> summary instead of the graph
  NoGraph,      // iterative retrieval without any index, answer from docs
  VanillaRAG,   // a single retrieval with the question, answer from docs
  QADocsOnly,   // GraphAnchor loop, answer from docs only
  QAGraphOnly,  // GraphAnchor loop, answer from the graph only
};

/// CLI spelling: graph_anchor, text_index, no_graph, vanilla, qa_docs, qa_graph.
std::string_view to_string(PipelineMode mode) noexcept;
std::optional<PipelineMode> parse_pipeline_mode(std::string_view name) noexcept;

IndexKind index_kind(PipelineMode mode) noexcept;
AnswerMode answer_mode(PipelineMode mode) noexcept;

struct PipelineConfig {
  int max_steps = 4;
  int top_k = 5;
  PipelineMode mode = PipelineMode::GraphAnchor;
  int parse_retry_limit = 2;
  int step_max_tokens = kDefaultStepMaxTokens;
  int answer_max_tokens = kDefaultAnswerMaxTokens;
  double temperature = 0.0;

  /// Throws Error(InvalidConfig).
  void validate() const;
};

struct StepRecord {
  int step = 0;  // 1-based
  std::string query_in;
  std::vector<Document> retrieved_docs;
  KnowledgeGraph graph_after;         // graph modes only
  GraphDelta delta;                   // diff(previous graph, graph_after)
  std::optional<std::string> notes;   // text-index mode only
  ReasoningBlock reasoning;
  std::optional<std::string> next_query;
  std::string raw_llm_text;           // last attempt
  int attempts = 0;
  std::vector<std::string> warnings;
  std::optional<std::string> parse_error;  // set when every attempt failed to parse
  std::int64_t elapsed_ms = 0;
};

enum class Termination { Sufficient, MaxSteps, ParseFailure, Error };

std::string_view to_string(Termination t) noexcept;
std::optional<Termination> parse_termination(std::string_view name) noexcept;

struct RunTrace {
  std::string id;
  std::string question;
  PipelineMode mode = PipelineMode::GraphAnchor;
  std::vector<StepRecord> steps;
  std::vector<Document> aggregated_docs;
  KnowledgeGraph final_graph;
  std::optional<std::string> final_notes;
  std::string answer;
  std::vector<std::string> answer_warnings;
  Termination termination = Termination::Error;
  std::optional<std::string> error;  // non-parse failure (transport, fixtures...)
  std::size_t llm_calls = 0;
  std::int64_t answer_ms = 0;
  std::int64_t total_ms = 0;

  [[nodiscard]] bool failed() const noexcept { return termination == Termination::Error; }
};

/// Shared, read-only collaborators. The model may be shared across threads.
struct PipelineDeps {
  const Retriever& retriever;
  LanguageModel& llm;
  const TemplateSet& templates;
};

/// Runs one question. Request tags are "<run_id>:step:<t>" and
/// "<run_id>:answer" (":retry:<n>" appended on parse retries).
/// Model and retrieval errors other than parse failures propagate.
RunTrace run_query(std::string_view question, const PipelineConfig& config,
                   const PipelineDeps& deps, std::string_view run_id = "q");

/// Like run_query but never throws for a per-question failure: the partial
/// trace is returned with termination Error and the message in `error`.
RunTrace run_query_recorded(std::string_view question, const PipelineConfig& config,
                            const PipelineDeps& deps, std::string_view run_id);

using ProgressFn = std::function<void(std::size_t done, std::size_t total, const RunTrace&)>;

/// Runs every question with at most `parallelism` in flight. The result is in
/// input order regardless of completion order.
std::vector<RunTrace> run_dataset(std::span<const DatasetItem> questions,
                                  const PipelineConfig& config, const PipelineDeps& deps,
                                  int parallelism, const ProgressFn& progress = {});

std::vector<Prediction> predictions_of(std::span<const RunTrace> traces);

struct TraceJsonOptions {
  bool include_timings = false;  // timings make files non-reproducible
};

Json trace_to_json(const RunTrace& trace, TraceJsonOptions options = {});
RunTrace trace_from_json(const Json& j);
std::string trace_to_string(const RunTrace& trace, TraceJsonOptions options = {});
RunTrace load_trace_file(const std::string& path);

/// File-name-safe form of a question id, used for traces/<id>.json.
std::string trace_file_stem(std::string_view question_id);

}  // namespace graph_anchor
