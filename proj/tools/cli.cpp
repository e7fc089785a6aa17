#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "app_config.hpp"
#include "graph_anchor/dataset.hpp"
#include "graph_anchor/error.hpp"
#include "graph_anchor/evaluation.hpp"
#include "graph_anchor/orchestrator.hpp"

namespace graph_anchor::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunOverrides {
  std::string config_path;
  std::string mode;
  int top_k = 0;
  int max_steps = 0;
  std::string out_dir;
  bool timings = false;
};

void add_run_flags(CLI::App& cmd, RunOverrides& o) {
  cmd.add_option("--config", o.config_path, "JSON config file")->required();
  cmd.add_option("--mode", o.mode,
                 "graph_anchor|text_index|no_graph|vanilla|qa_docs|qa_graph");
  cmd.add_option("--top-k", o.top_k, "documents retrieved per step");
  cmd.add_option("--max-steps", o.max_steps, "maximum retrieval steps");
  cmd.add_option("--out", o.out_dir, "output directory");
  cmd.add_flag("--timings", o.timings, "record wall-clock timings in traces");
}

AppConfig resolve_config(const RunOverrides& o) {
  AppConfig config = load_app_config(o.config_path);
  if (!o.mode.empty()) {
    auto mode = parse_pipeline_mode(o.mode);
    if (!mode) throw UsageError("unknown --mode '" + o.mode + "'");
    config.pipeline.mode = *mode;
  }
  if (o.top_k != 0) config.pipeline.top_k = o.top_k;
  if (o.max_steps != 0) config.pipeline.max_steps = o.max_steps;
  if (!o.out_dir.empty()) config.output_dir = o.out_dir;
  config.pipeline.validate();
  return config;
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << content;
}

void write_trace(const fs::path& dir, const RunTrace& trace, bool timings) {
  write_text(dir / "traces" / (trace_file_stem(trace.id) + ".json"),
             trace_to_string(trace, TraceJsonOptions{timings}));
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v * 100.0);
  return buf;
}

// --- commands --------------------------------------------------------------

int cmd_ingest(const std::string& corpus, std::string index_out, std::ostream& out) {
  auto index = CorpusIndex::ingest_file(corpus);
  if (index_out.empty()) index_out = corpus + ".index.json";
  index.save(index_out);
  out << "ingested " << index.size() << " documents\n";
  return kOk;
}

int cmd_ask(const RunOverrides& o, const std::string& question, const std::string& id,
            std::ostream& out, std::ostream& err) {
  if (question.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw UsageError("question must not be empty");
  }
  auto config = resolve_config(o);
  auto runtime = build_runtime(config);
  auto trace = run_query(question, config.pipeline, runtime.deps(), id);
  write_trace(config.output_dir, trace, o.timings);
  for (const auto& w : trace.answer_warnings) err << "warning: " << w << "\n";
  out << trace.answer << "\n";
  return kOk;
}

int cmd_run(const RunOverrides& o, const std::string& dataset_path, int parallelism,
            std::ostream& out, std::ostream& err) {
  if (parallelism < 1) throw UsageError("--parallelism must be >= 1");
  auto config = resolve_config(o);
  std::vector<DatasetItem> dataset;
  try {
    dataset = load_dataset_file(dataset_path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw UsageError(e.what());
    throw;
  }
  auto runtime = build_runtime(config);
  const fs::path out_dir = config.output_dir;
  if (dataset.empty()) {
    err << "warning: dataset " << dataset_path << " has no questions\n";
    write_text(out_dir / "predictions.jsonl", "");
    return kOk;
  }

  auto traces = run_dataset(dataset, config.pipeline, runtime.deps(), parallelism,
                            [&](std::size_t done, std::size_t total, const RunTrace& t) {
                              err << "[" << done << "/" << total << "] " << t.id << " "
                                  << to_string(t.termination);
                              if (t.error) err << ": " << *t.error;
                              err << "\n";
                            });
  std::size_t failed = 0;
  for (const auto& t : traces) {
    write_trace(out_dir, t, o.timings);
    if (t.failed()) ++failed;
  }
  write_text(out_dir / "predictions.jsonl", predictions_to_jsonl(predictions_of(traces)));
  out << "completed " << traces.size() - failed << "/" << traces.size() << " questions; predictions in "
      << (out_dir / "predictions.jsonl").string() << "\n";
  return failed == traces.size() ? kRuntimeError : kOk;
}

int cmd_eval(const std::string& predictions_path, const std::string& dataset_path,
             std::string report_path, std::ostream& out) {
  auto predictions = load_predictions_file(predictions_path);
  auto dataset = load_dataset_file(dataset_path);
  auto report = evaluate(predictions, dataset);
  if (report_path.empty()) {
    report_path = (fs::path(predictions_path).parent_path() / "eval_report.json").string();
  }
  write_text(report_path, metric_report_to_json(report).dump(2) + "\n");
  out << "F1=" << percent(report.mean_f1) << " EM=" << percent(report.mean_em) << "\n";
  return kOk;
}

int cmd_analyze(const std::string& traces_dir, const std::string& dataset_path,
                std::string out_dir, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(traces_dir)) throw Error(ErrorCode::Io, "not a directory: " + traces_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(traces_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<RunTrace> traces;
  for (const auto& f : files) {
    try {
      traces.push_back(load_trace_file(f.string()));
    } catch (const Error& e) {
      err << "warning: skipping " << f.string() << ": " << e.what() << "\n";
    }
  }
  auto dataset = load_dataset_file(dataset_path);
  auto report = analyze(traces, gold_answers(dataset));
  if (out_dir.empty()) out_dir = (fs::path(traces_dir).parent_path() / "analysis").string();
  const fs::path dir = out_dir;
  write_text(dir / "analysis.json", analysis_to_json(report).dump(2) + "\n");
  write_text(dir / "hit_rate_by_step.csv", hit_rate_csv(report));
  write_text(dir / "overlap.csv", overlap_csv(report));
  write_text(dir / "graph_growth.csv", graph_growth_csv(report));
  out << "analyzed " << traces.size() << " traces; overlap_rate=" << percent(report.overlap_rate)
      << "; report in " << dir.string() << "\n";
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-anchored iterative retrieval-augmented QA engine", "graph_anchor"};
  app.require_subcommand(1);

  std::string corpus, index_out;
  auto* ingest = app.add_subcommand("ingest", "Build a BM25 index from a JSONL corpus");
  ingest->add_option("corpus", corpus, "JSONL corpus file")->required();
  ingest->add_option("--out", index_out, "index file (default: <corpus>.index.json)");

  RunOverrides ask_opts;
  std::string question, ask_id = "ask";
  auto* ask = app.add_subcommand("ask", "Answer one question and write its trace");
  add_run_flags(*ask, ask_opts);
  ask->add_option("question", question, "the question")->required();
  ask->add_option("--id", ask_id, "question id used for the trace file");

  RunOverrides run_opts;
  std::string dataset_path;
  int parallelism = 1;
  auto* run = app.add_subcommand("run", "Answer every question of a dataset");
  add_run_flags(*run, run_opts);
  run->add_option("--dataset", dataset_path, "JSONL dataset file")->required();
  run->add_option("--parallelism", parallelism, "questions in flight");

  std::string predictions_path, eval_dataset, eval_out;
  auto* eval = app.add_subcommand("eval", "Score predictions with token F1 and exact match");
  eval->add_option("--predictions", predictions_path, "predictions JSONL")->required();
  eval->add_option("--dataset", eval_dataset, "JSONL dataset file")->required();
  eval->add_option("--out", eval_out, "report path (default: next to the predictions)");

  std::string traces_dir, analyze_dataset, analyze_out;
  auto* analyze_cmd = app.add_subcommand("analyze", "Hit rate, overlap and graph growth over traces");
  analyze_cmd->add_option("--traces", traces_dir, "directory of trace JSON files")->required();
  analyze_cmd->add_option("--dataset", analyze_dataset, "JSONL dataset file")->required();
  analyze_cmd->add_option("--out", analyze_out, "output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsageError;
  }

  try {
    if (*ingest) return cmd_ingest(corpus, index_out, out);
    if (*ask) return cmd_ask(ask_opts, question, ask_id, out, err);
    if (*run) return cmd_run(run_opts, dataset_path, parallelism, out, err);
    if (*eval) return cmd_eval(predictions_path, eval_dataset, eval_out, out);
    if (*analyze_cmd) return cmd_analyze(traces_dir, analyze_dataset, analyze_out, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidConfig ? kUsageError : kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace graph_anchor::cli
