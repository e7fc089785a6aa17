#include "graph_anchor/orchestrator.hpp"

#include <atomic>
#include <mutex>
#include <thread>

#include "graph_anchor/error.hpp"

namespace graph_anchor {

namespace {

struct ModeName {
  PipelineMode mode;
  std::string_view name;
};

constexpr ModeName kModeNames[] = {
    {PipelineMode::GraphAnchor, "graph_anchor"}, {PipelineMode::TextIndex, "text_index"},
    {PipelineMode::NoGraph, "no_graph"},         {PipelineMode::VanillaRAG, "vanilla"},
    {PipelineMode::QADocsOnly, "qa_docs"},       {PipelineMode::QAGraphOnly, "qa_graph"},
};

using Clock = std::chrono::steady_clock;

std::int64_t ms_since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

bool is_parse_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoGraphBlock:
    case ErrorCode::MissingJudgement:
    case ErrorCode::InvalidJudgement:
    case ErrorCode::QueryMissing:
    case ErrorCode::EmptyAnswer:
      return true;
    default:
      return false;
  }
}

std::string attempt_tag(std::string_view run_id, std::string_view turn, int attempt) {
  std::string tag(run_id);
  tag += ':';
  tag += turn;
  if (attempt > 0) tag += ":retry:" + std::to_string(attempt);
  return tag;
}

class QueryRun {
 public:
  QueryRun(RunTrace& trace, const PipelineConfig& config, const PipelineDeps& deps,
           std::string_view run_id)
      : trace_(trace), config_(config), deps_(deps), run_id_(run_id),
        kind_(index_kind(config.mode)) {}

  void execute() {
    const auto started = Clock::now();
    const int max_steps = config_.mode == PipelineMode::VanillaRAG ? 1 : config_.max_steps;
    std::string query = trace_.question;
    std::optional<StepOutput> previous;
    KnowledgeGraph graph;

    for (int t = 1; t <= max_steps; ++t) {
      const auto step_started = Clock::now();
      StepRecord record;
      record.step = t;
      record.query_in = query;
      try {
        record.retrieved_docs = deps_.retriever.retrieve(query, static_cast<std::size_t>(config_.top_k));
      } catch (const Error& e) {
        // A subquery with no searchable terms ends retrieval; the question itself must be searchable.
        if (e.code() != ErrorCode::EmptyQuery || t == 1) throw;
        trace_.answer_warnings.push_back("step " + std::to_string(t) + ": " + e.what());
        trace_.termination = Termination::ParseFailure;
        break;
      }

      const auto prompt = step_prompt(t, record.retrieved_docs, previous ? &*previous : nullptr,
                                      previous ? previous->next_query.value_or("") : "");
      std::optional<StepOutput> output;
      std::string last_error;
      for (int attempt = 0; attempt <= config_.parse_retry_limit; ++attempt) {
        record.attempts = attempt + 1;
        record.raw_llm_text = call("step:" + std::to_string(t), attempt, prompt,
                                   config_.step_max_tokens);
        try {
          output = parse_step_output(record.raw_llm_text, kind_);
          break;
        } catch (const Error& e) {
          if (!is_parse_error(e.code())) throw;
          last_error = e.what();
        }
      }

      if (!output) {
        record.graph_after = graph;
        if (kind_ == IndexKind::Notes && previous) record.notes = previous->notes;
        record.parse_error = last_error;
        record.elapsed_ms = ms_since(step_started);
        push_step(std::move(record));
        trace_.termination = Termination::ParseFailure;
        break;
      }

      if (kind_ == IndexKind::Graph) {
        // The model may drop earlier content; the index only grows.
        auto merged = merge(graph, output->graph);
        record.delta = diff(graph, merged);
        graph = std::move(merged);
        output->graph = graph;
        record.graph_after = graph;
      }
      record.notes = output->notes;
      record.reasoning = output->reasoning;
      record.next_query = output->next_query;
      record.warnings = output->warnings;
      record.elapsed_ms = ms_since(step_started);
      push_step(std::move(record));

      if (output->reasoning.judgement == Sufficiency::Sufficient) {
        trace_.termination = Termination::Sufficient;
        break;
      }
      if (t == max_steps) {
        trace_.termination = Termination::MaxSteps;
        break;
      }
      query = *output->next_query;
      previous = std::move(output);
    }

    std::vector<std::vector<Document>> per_step;
    for (const auto& s : trace_.steps) per_step.push_back(s.retrieved_docs);
    trace_.aggregated_docs = aggregate(per_step);
    if (kind_ == IndexKind::Graph) trace_.final_graph = graph;
    if (kind_ == IndexKind::Notes) {
      trace_.final_notes = trace_.steps.empty() ? std::string{} : trace_.steps.back().notes.value_or("");
    }

    answer();
    trace_.total_ms = ms_since(started);
  }

 private:
  std::string step_prompt(int t, std::span<const Document> docs, const StepOutput* previous,
                          std::string_view previous_query) const {
    const auto& templates = deps_.templates;
    switch (kind_) {
      case IndexKind::Graph:
        if (t == 1) return build_init_prompt(trace_.question, docs, templates.get(TemplateName::Init));
        return build_update_prompt(trace_.question, docs, *previous, previous_query,
                                   templates.get(TemplateName::Update));
      case IndexKind::Notes:
        return build_step_prompt(trace_.question, docs, previous, previous_query,
                                 templates.get(TemplateName::TextIndexUpdate));
      case IndexKind::None:
        return build_step_prompt(trace_.question, docs, previous, previous_query,
                                 templates.get(TemplateName::NoGraphReason));
    }
    return {};
  }

  std::string call(const std::string& turn, int attempt, const std::string& prompt, int max_tokens) {
    GenerationRequest request;
    request.prompt = prompt;
    request.max_new_tokens = max_tokens;
    request.temperature = config_.temperature;
    request.request_tag = attempt_tag(run_id_, turn, attempt);
    ++trace_.llm_calls;
    return deps_.llm.generate(request).text;
  }

  void push_step(StepRecord record) { trace_.steps.push_back(std::move(record)); }

  void answer() {
    const auto started = Clock::now();
    const auto& tmpl = deps_.templates.get(TemplateName::Answer);
    const auto mode = answer_mode(config_.mode);
    std::string prompt;
    if (kind_ == IndexKind::Notes) {
      const auto block = "<notes>" + trace_.final_notes.value_or("") + "</notes>";
      prompt = build_answer_prompt(trace_.question, trace_.aggregated_docs, std::string_view{block},
                                   mode, tmpl);
    } else {
      prompt = build_answer_prompt(trace_.question, trace_.aggregated_docs, trace_.final_graph,
                                   mode, tmpl);
    }
    std::string last_error;
    for (int attempt = 0; attempt <= config_.parse_retry_limit; ++attempt) {
      auto text = call("answer", attempt, prompt, config_.answer_max_tokens);
      try {
        auto parsed = parse_answer(text);
        trace_.answer = std::move(parsed.answer);
        for (auto& w : parsed.warnings) trace_.answer_warnings.push_back(std::move(w));
        trace_.answer_ms = ms_since(started);
        return;
      } catch (const Error& e) {
        if (!is_parse_error(e.code())) throw;
        last_error = e.what();
      }
    }
    trace_.answer.clear();
    trace_.answer_warnings.push_back("no usable answer: " + last_error);
    trace_.answer_ms = ms_since(started);
  }

  RunTrace& trace_;
  const PipelineConfig& config_;
  const PipelineDeps& deps_;
  std::string run_id_;
  IndexKind kind_;
};

void start_trace(RunTrace& trace, std::string_view question, const PipelineConfig& config,
                 std::string_view run_id) {
  config.validate();
  if (question.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw Error(ErrorCode::InvalidConfig, "question is empty");
  }
  trace.id = std::string(run_id);
  trace.question = std::string(question);
  trace.mode = config.mode;
}

}  // namespace

std::string_view to_string(PipelineMode mode) noexcept {
  for (const auto& m : kModeNames) {
    if (m.mode == mode) return m.name;
  }
  return "unknown";
}

std::optional<PipelineMode> parse_pipeline_mode(std::string_view name) noexcept {
  for (const auto& m : kModeNames) {
    if (m.name == name) return m.mode;
  }
  return std::nullopt;
}

IndexKind index_kind(PipelineMode mode) noexcept {
  switch (mode) {
    case PipelineMode::GraphAnchor:
    case PipelineMode::QADocsOnly:
    case PipelineMode::QAGraphOnly: return IndexKind::Graph;
    case PipelineMode::TextIndex: return IndexKind::Notes;
    case PipelineMode::NoGraph:
    case PipelineMode::VanillaRAG: return IndexKind::None;
  }
  return IndexKind::None;
}

AnswerMode answer_mode(PipelineMode mode) noexcept {
  switch (mode) {
    case PipelineMode::GraphAnchor:
    case PipelineMode::TextIndex: return AnswerMode::DocsAndGraph;
    case PipelineMode::QAGraphOnly: return AnswerMode::GraphOnly;
    case PipelineMode::QADocsOnly:
    case PipelineMode::NoGraph:
    case PipelineMode::VanillaRAG: return AnswerMode::DocsOnly;
  }
  return AnswerMode::DocsOnly;
}

void PipelineConfig::validate() const {
  if (max_steps < 1) throw Error(ErrorCode::InvalidConfig, "max_steps must be >= 1");
  if (top_k < 1) throw Error(ErrorCode::InvalidConfig, "top_k must be >= 1");
  if (parse_retry_limit < 0) throw Error(ErrorCode::InvalidConfig, "parse_retry_limit must be >= 0");
  if (step_max_tokens < 1 || answer_max_tokens < 1) {
    throw Error(ErrorCode::InvalidConfig, "max token budgets must be >= 1");
  }
  if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidConfig, "temperature must be >= 0");
}

std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::Sufficient: return "sufficient";
    case Termination::MaxSteps: return "max_steps";
    case Termination::ParseFailure: return "parse_failure";
    case Termination::Error: return "error";
  }
  return "error";
}

std::optional<Termination> parse_termination(std::string_view name) noexcept {
  for (auto t : {Termination::Sufficient, Termination::MaxSteps, Termination::ParseFailure,
                 Termination::Error}) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

RunTrace run_query(std::string_view question, const PipelineConfig& config,
                   const PipelineDeps& deps, std::string_view run_id) {
  RunTrace trace;
  start_trace(trace, question, config, run_id);
  QueryRun(trace, config, deps, run_id).execute();
  return trace;
}

RunTrace run_query_recorded(std::string_view question, const PipelineConfig& config,
                            const PipelineDeps& deps, std::string_view run_id) {
  RunTrace trace;
  trace.id = std::string(run_id);
  trace.question = std::string(question);
  trace.mode = config.mode;
  try {
    start_trace(trace, question, config, run_id);
    QueryRun(trace, config, deps, run_id).execute();
  } catch (const std::exception& e) {
    trace.termination = Termination::Error;
    trace.error = e.what();
    std::vector<std::vector<Document>> per_step;
    for (const auto& s : trace.steps) per_step.push_back(s.retrieved_docs);
    trace.aggregated_docs = aggregate(per_step);
    if (index_kind(config.mode) == IndexKind::Graph && !trace.steps.empty()) {
      trace.final_graph = trace.steps.back().graph_after;
    }
  }
  return trace;
}

std::vector<RunTrace> run_dataset(std::span<const DatasetItem> questions,
                                  const PipelineConfig& config, const PipelineDeps& deps,
                                  int parallelism, const ProgressFn& progress) {
  config.validate();
  if (parallelism < 1) throw Error(ErrorCode::InvalidConfig, "parallelism must be >= 1");
  std::vector<RunTrace> results(questions.size());
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex progress_mutex;

  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= questions.size()) return;
      results[i] = run_query_recorded(questions[i].question, config, deps, questions[i].id);
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(++done, questions.size(), results[i]);
      }
    }
  };

  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism), questions.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  return results;
}

std::vector<Prediction> predictions_of(std::span<const RunTrace> traces) {
  std::vector<Prediction> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back({t.id, t.answer});
  return out;
}

}  // namespace graph_anchor
