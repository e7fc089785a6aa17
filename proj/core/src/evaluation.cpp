#include "graph_anchor/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "graph_anchor/error.hpp"

namespace graph_anchor {

namespace {

bool is_ascii_punct(unsigned char c) noexcept {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double f1_single(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
  std::unordered_map<std::string, int> counts;
  for (const auto& t : gold) ++counts[t];
  int overlap = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

const std::vector<std::string>& golds_for(const RunTrace& trace, const GoldAnswers& golds) {
  auto it = golds.find(trace.id);
  if (it == golds.end()) {
    throw Error(ErrorCode::IdMismatch, "no gold answers for trace '" + trace.id + "'");
  }
  return it->second;
}

std::vector<std::string> normalized_golds(const std::vector<std::string>& golds) {
  std::vector<std::string> out;
  for (const auto& g : golds) {
    auto n = normalize_answer(g);
    if (!n.empty()) out.push_back(std::move(n));
  }
  return out;
}

bool contains_any(const std::string& haystack, const std::vector<std::string>& needles) {
  return std::any_of(needles.begin(), needles.end(),
                     [&](const std::string& n) { return haystack.find(n) != std::string::npos; });
}

std::size_t max_steps_of(std::span<const RunTrace> traces) {
  std::size_t n = 0;
  for (const auto& t : traces) n = std::max(n, t.steps.size());
  return n;
}

}  // namespace

std::string normalize_answer(std::string_view s) {
  std::string stripped;
  stripped.reserve(s.size());
  for (char ch : s) {
    auto c = static_cast<unsigned char>(ch);
    if (is_ascii_punct(c)) continue;
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    if (c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') c = ' ';
    stripped.push_back(static_cast<char>(c));
  }
  std::string out;
  for (auto& token : split_ws(stripped)) {
    if (token == "a" || token == "an" || token == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += token;
  }
  return out;
}

double token_f1(std::string_view prediction, std::span<const std::string> golds) {
  const auto pred = split_ws(normalize_answer(prediction));
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, f1_single(pred, split_ws(normalize_answer(g))));
  return best;
}

int exact_match(std::string_view prediction, std::span<const std::string> golds) {
  const auto pred = normalize_answer(prediction);
  for (const auto& g : golds) {
    if (normalize_answer(g) == pred) return 1;
  }
  return 0;
}

MetricReport evaluate(std::span<const Prediction> predictions,
                      std::span<const DatasetItem> dataset) {
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.id, &p).second) {
      throw Error(ErrorCode::IdMismatch, "duplicate prediction id '" + p.id + "'");
    }
  }
  if (by_id.size() != dataset.size()) {
    throw Error(ErrorCode::IdMismatch, std::to_string(by_id.size()) + " predictions for " +
                                           std::to_string(dataset.size()) + " questions");
  }
  MetricReport report;
  for (const auto& item : dataset) {
    auto it = by_id.find(item.id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::IdMismatch, "no prediction for question '" + item.id + "'");
    }
    QuestionScore score{item.id, token_f1(it->second->answer, item.answers),
                        exact_match(it->second->answer, item.answers)};
    report.mean_f1 += score.f1;
    report.mean_em += score.em;
    report.per_question.push_back(std::move(score));
  }
  if (!dataset.empty()) {
    report.mean_f1 /= static_cast<double>(dataset.size());
    report.mean_em /= static_cast<double>(dataset.size());
  }
  return report;
}

Json metric_report_to_json(const MetricReport& report) {
  Json rows = Json::array();
  for (const auto& q : report.per_question) rows.push_back(Json{{"id", q.id}, {"f1", q.f1}, {"em", q.em}});
  return Json{{"count", report.per_question.size()},
              {"mean_f1", report.mean_f1},
              {"mean_em", report.mean_em},
              {"per_question", std::move(rows)}};
}

GoldAnswers gold_answers(std::span<const DatasetItem> dataset) {
  GoldAnswers out;
  for (const auto& item : dataset) out[item.id] = item.answers;
  return out;
}

std::vector<double> answer_hit_rate(std::span<const RunTrace> traces, const GoldAnswers& golds) {
  const auto steps = max_steps_of(traces);
  std::vector<double> hits(steps, 0.0);
  if (traces.empty()) return hits;
  for (const auto& trace : traces) {
    const auto needles = normalized_golds(golds_for(trace, golds));
    std::optional<std::size_t> first_hit;  // 0-based step
    for (std::size_t s = 0; s < trace.steps.size() && !first_hit; ++s) {
      for (const auto& doc : trace.steps[s].retrieved_docs) {
        if (contains_any(normalize_answer(doc.title + " " + doc.text), needles)) {
          first_hit = s;
          break;
        }
      }
    }
    if (first_hit) {
      for (std::size_t s = *first_hit; s < steps; ++s) hits[s] += 1.0;
    }
  }
  for (auto& h : hits) h /= static_cast<double>(traces.size());
  return hits;
}

std::vector<double> graph_hit_rate(std::span<const RunTrace> traces, const GoldAnswers& golds) {
  std::vector<const RunTrace*> graph_traces;
  for (const auto& t : traces) {
    if (index_kind(t.mode) == IndexKind::Graph) graph_traces.push_back(&t);
  }
  std::size_t steps = 0;
  for (const auto* t : graph_traces) steps = std::max(steps, t->steps.size());
  std::vector<double> hits(steps, 0.0);
  if (graph_traces.empty()) return hits;
  for (const auto* trace : graph_traces) {
    const auto needles = normalized_golds(golds_for(*trace, golds));
    bool hit = false;
    for (std::size_t s = 0; s < steps; ++s) {
      if (!hit && s < trace->steps.size()) {
        hit = contains_any(normalize_answer(linearize(trace->steps[s].graph_after)), needles);
      }
      if (hit) hits[s] += 1.0;
    }
  }
  for (auto& h : hits) h /= static_cast<double>(graph_traces.size());
  return hits;
}

TraceOverlap trace_overlap(const RunTrace& trace) {
  TraceOverlap o;
  o.id = trace.id;
  std::unordered_set<std::string> ids;
  for (const auto& step : trace.steps) {
    for (const auto& doc : step.retrieved_docs) {
      ++o.retrieved;
      ids.insert(doc.id);
    }
  }
  o.unique = ids.size();
  if (o.retrieved > 0) {
    o.rate = static_cast<double>(o.retrieved - o.unique) / static_cast<double>(o.retrieved);
  }
  return o;
}

double overlap_rate(std::span<const RunTrace> traces) {
  if (traces.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : traces) sum += trace_overlap(t).rate;
  return sum / static_cast<double>(traces.size());
}

GraphGrowth graph_growth(std::span<const RunTrace> traces) {
  GraphGrowth g;
  for (const auto& trace : traces) {
    if (index_kind(trace.mode) != IndexKind::Graph) continue;
    for (std::size_t s = 0; s < trace.steps.size(); ++s) {
      if (g.traces_by_step.size() <= s) {
        g.traces_by_step.push_back(0);
        g.entities_by_step.push_back(0.0);
        g.triples_by_step.push_back(0.0);
      }
      const auto st = stats(trace.steps[s].graph_after);
      ++g.traces_by_step[s];
      g.entities_by_step[s] += static_cast<double>(st.entity_count);
      g.triples_by_step[s] += static_cast<double>(st.triple_count);
    }
  }
  for (std::size_t s = 0; s < g.traces_by_step.size(); ++s) {
    g.entities_by_step[s] /= static_cast<double>(g.traces_by_step[s]);
    g.triples_by_step[s] /= static_cast<double>(g.traces_by_step[s]);
  }
  return g;
}

AnalysisReport analyze(std::span<const RunTrace> traces, const GoldAnswers& golds) {
  AnalysisReport r;
  r.trace_count = traces.size();
  r.hit_rate_by_step = answer_hit_rate(traces, golds);
  r.graph_hit_rate_by_step = graph_hit_rate(traces, golds);
  r.overlap_rate = overlap_rate(traces);
  for (const auto& t : traces) r.per_trace_overlap.push_back(trace_overlap(t));
  r.growth = graph_growth(traces);
  return r;
}

Json analysis_to_json(const AnalysisReport& report) {
  Json overlaps = Json::array();
  for (const auto& o : report.per_trace_overlap) {
    overlaps.push_back(Json{{"id", o.id}, {"retrieved", o.retrieved}, {"unique", o.unique}, {"rate", o.rate}});
  }
  return Json{{"trace_count", report.trace_count},
              {"hit_rate_by_step", report.hit_rate_by_step},
              {"graph_hit_rate_by_step", report.graph_hit_rate_by_step},
              {"overlap_rate", report.overlap_rate},
              {"per_trace_overlap", std::move(overlaps)},
              {"entities_by_step", report.growth.entities_by_step},
              {"triples_by_step", report.growth.triples_by_step},
              {"traces_by_step", report.growth.traces_by_step}};
}

std::string hit_rate_csv(const AnalysisReport& report) {
  std::string out = "step,hit_rate,graph_hit_rate\n";
  for (std::size_t s = 0; s < report.hit_rate_by_step.size(); ++s) {
    out += std::to_string(s + 1) + "," + fixed(report.hit_rate_by_step[s]) + ",";
    if (s < report.graph_hit_rate_by_step.size()) out += fixed(report.graph_hit_rate_by_step[s]);
    out += "\n";
  }
  return out;
}

std::string overlap_csv(const AnalysisReport& report) {
  std::string out = "id,retrieved,unique,overlap_rate\n";
  for (const auto& o : report.per_trace_overlap) {
    out += csv_field(o.id) + "," + std::to_string(o.retrieved) + "," + std::to_string(o.unique) +
           "," + fixed(o.rate) + "\n";
  }
  return out;
}

std::string graph_growth_csv(const AnalysisReport& report) {
  std::string out = "step,traces,mean_entities,mean_triples\n";
  const auto& g = report.growth;
  for (std::size_t s = 0; s < g.traces_by_step.size(); ++s) {
    out += std::to_string(s + 1) + "," + std::to_string(g.traces_by_step[s]) + "," +
           fixed(g.entities_by_step[s]) + "," + fixed(g.triples_by_step[s]) + "\n";
  }
  return out;
}

}  // namespace graph_anchor
