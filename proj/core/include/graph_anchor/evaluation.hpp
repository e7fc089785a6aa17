#pragma once

// Answer scoring (token F1, exact match) and trace analysis: cumulative
// answer hit rate per step, document overlap, and graph growth.

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "graph_anchor/dataset.hpp"
#include "graph_anchor/json_fwd.hpp"
#include "graph_anchor/orchestrator.hpp"

namespace graph_anchor {

/// Lowercase, strip ASCII punctuation, drop the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view s);

/// Max over golds of the multiset token F1 between normalized strings.
double token_f1(std::string_view prediction, std::span<const std::string> golds);

/// 1 iff the normalized prediction equals some normalized gold.
int exact_match(std::string_view prediction, std::span<const std::string> golds);

struct QuestionScore {
  std::string id;
  double f1 = 0.0;
  int em = 0;
};

struct MetricReport {
  std::vector<QuestionScore> per_question;  // dataset order
  double mean_f1 = 0.0;
  double mean_em = 0.0;
};

/// Predictions and dataset must cover the same ids; otherwise Error(IdMismatch).
MetricReport evaluate(std::span<const Prediction> predictions,
                      std::span<const DatasetItem> dataset);

Json metric_report_to_json(const MetricReport& report);

using GoldAnswers = std::unordered_map<std::string, std::vector<std::string>>;

GoldAnswers gold_answers(std::span<const DatasetItem> dataset);

/// Entry s-1 is the fraction of traces for which a document retrieved at any
/// step <= s contains a normalized gold answer (title and text, normalized).
/// Traces that stopped earlier keep their final state, so rates never drop.
/// Throws Error(IdMismatch) when a trace has no gold answers.
std::vector<double> answer_hit_rate(std::span<const RunTrace> traces, const GoldAnswers& golds);

/// Same cumulative rule against the normalized linearized graph after each
/// step. Traces without a graph index are ignored.
std::vector<double> graph_hit_rate(std::span<const RunTrace> traces, const GoldAnswers& golds);

struct TraceOverlap {
  std::string id;
  std::size_t retrieved = 0;
  std::size_t unique = 0;
  double rate = 0.0;  // (retrieved - unique) / retrieved, 0 when nothing was retrieved
};

TraceOverlap trace_overlap(const RunTrace& trace);

/// Mean of the per-trace duplicate rates; 0 for no traces.
double overlap_rate(std::span<const RunTrace> traces);

struct GraphGrowth {
  std::vector<double> entities_by_step;  // mean over traces that reached the step
  std::vector<double> triples_by_step;
  std::vector<std::size_t> traces_by_step;
};

/// Only traces that carry a graph index contribute.
GraphGrowth graph_growth(std::span<const RunTrace> traces);

struct AnalysisReport {
  std::size_t trace_count = 0;
  std::vector<double> hit_rate_by_step;
  std::vector<double> graph_hit_rate_by_step;
  double overlap_rate = 0.0;
  std::vector<TraceOverlap> per_trace_overlap;
  GraphGrowth growth;
};

AnalysisReport analyze(std::span<const RunTrace> traces, const GoldAnswers& golds);

Json analysis_to_json(const AnalysisReport& report);
std::string hit_rate_csv(const AnalysisReport& report);
std::string overlap_csv(const AnalysisReport& report);
std::string graph_growth_csv(const AnalysisReport& report);

}  // namespace graph_anchor
