#include <nlohmann/json.hpp>
#include <unordered_map>

#include "graph_anchor/error.hpp"
#include "graph_anchor/orchestrator.hpp"
#include "text_util.hpp"

namespace graph_anchor {

namespace {

Json optional_string(const std::optional<std::string>& s) {
  return s ? Json(*s) : Json(nullptr);
}

std::optional<std::string> read_optional_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

Json step_to_json(const StepRecord& s, IndexKind kind, TraceJsonOptions options) {
  Json ids = Json::array();
  for (const auto& d : s.retrieved_docs) ids.push_back(d.id);
  Json j{{"step", s.step}, {"query", s.query_in}, {"retrieved", std::move(ids)}};
  if (kind == IndexKind::Graph) {
    const auto st = stats(s.graph_after);
    j["graph"] = graph_to_json(s.graph_after);
    j["delta"] = delta_to_json(s.delta);
    j["graph_stats"] = Json{{"entities", st.entity_count}, {"triples", st.triple_count}};
  } else if (kind == IndexKind::Notes) {
    j["notes"] = optional_string(s.notes);
  }
  j["think"] = s.reasoning.think;
  j["judgement"] = s.parse_error ? Json(nullptr) : Json(std::string(to_string(s.reasoning.judgement)));
  j["next_query"] = optional_string(s.next_query);
  j["attempts"] = s.attempts;
  j["raw_llm_text"] = s.raw_llm_text;
  j["warnings"] = s.warnings;
  if (s.parse_error) j["parse_error"] = *s.parse_error;
  if (options.include_timings) j["elapsed_ms"] = s.elapsed_ms;
  return j;
}

}  // namespace

Json trace_to_json(const RunTrace& trace, TraceJsonOptions options) {
  const auto kind = index_kind(trace.mode);
  Json steps = Json::array();
  for (const auto& s : trace.steps) steps.push_back(step_to_json(s, kind, options));
  Json docs = Json::array();
  for (const auto& d : trace.aggregated_docs) docs.push_back(document_to_json(d));

  Json j{{"id", trace.id},
         {"question", trace.question},
         {"mode", std::string(to_string(trace.mode))},
         {"termination", std::string(to_string(trace.termination))}};
  if (trace.error) j["error"] = *trace.error;
  j["steps"] = std::move(steps);
  j["aggregated_docs"] = std::move(docs);
  if (kind == IndexKind::Graph) {
    j["final_graph"] = graph_to_json(trace.final_graph);
  } else if (kind == IndexKind::Notes) {
    j["final_notes"] = optional_string(trace.final_notes);
  }
  j["answer"] = trace.answer;
  j["answer_warnings"] = trace.answer_warnings;
  j["llm_calls"] = trace.llm_calls;
  if (options.include_timings) {
    j["timings"] = Json{{"answer_ms", trace.answer_ms}, {"total_ms", trace.total_ms}};
  }
  return j;
}

RunTrace trace_from_json(const Json& j) {
  try {
    RunTrace t;
    t.id = j.at("id").get<std::string>();
    t.question = j.at("question").get<std::string>();
    auto mode = parse_pipeline_mode(j.at("mode").get<std::string>());
    if (!mode) throw Error(ErrorCode::MalformedRecord, "unknown mode in trace");
    t.mode = *mode;
    auto term = parse_termination(j.at("termination").get<std::string>());
    if (!term) throw Error(ErrorCode::MalformedRecord, "unknown termination in trace");
    t.termination = *term;
    t.error = read_optional_string(j, "error");

    std::unordered_map<std::string, Document> by_id;
    for (const auto& d : j.at("aggregated_docs")) {
      auto doc = document_from_json(d);
      by_id.emplace(doc.id, doc);
      t.aggregated_docs.push_back(std::move(doc));
    }
    const auto kind = index_kind(t.mode);
    for (const auto& sj : j.at("steps")) {
      StepRecord s;
      s.step = sj.at("step").get<int>();
      s.query_in = sj.at("query").get<std::string>();
      for (const auto& id : sj.at("retrieved")) {
        auto it = by_id.find(id.get<std::string>());
        if (it == by_id.end()) {
          throw Error(ErrorCode::MalformedRecord,
                      "step document '" + id.get<std::string>() + "' missing from aggregated_docs");
        }
        s.retrieved_docs.push_back(it->second);
      }
      if (kind == IndexKind::Graph) {
        s.graph_after = graph_from_json(sj.at("graph"));
        s.delta = delta_from_json(sj.at("delta"));
      } else if (kind == IndexKind::Notes) {
        s.notes = read_optional_string(sj, "notes");
      }
      s.reasoning.think = sj.value("think", std::string{});
      s.parse_error = read_optional_string(sj, "parse_error");
      if (auto judgement = read_optional_string(sj, "judgement")) {
        s.reasoning.judgement =
            *judgement == "sufficient" ? Sufficiency::Sufficient : Sufficiency::Insufficient;
      }
      s.next_query = read_optional_string(sj, "next_query");
      s.attempts = sj.value("attempts", 0);
      s.raw_llm_text = sj.value("raw_llm_text", std::string{});
      if (sj.contains("warnings")) s.warnings = sj.at("warnings").get<std::vector<std::string>>();
      s.elapsed_ms = sj.value("elapsed_ms", std::int64_t{0});
      t.steps.push_back(std::move(s));
    }
    if (kind == IndexKind::Graph && j.contains("final_graph")) {
      t.final_graph = graph_from_json(j.at("final_graph"));
    }
    t.final_notes = read_optional_string(j, "final_notes");
    t.answer = j.at("answer").get<std::string>();
    if (j.contains("answer_warnings")) {
      t.answer_warnings = j.at("answer_warnings").get<std::vector<std::string>>();
    }
    t.llm_calls = j.value("llm_calls", std::size_t{0});
    if (auto it = j.find("timings"); it != j.end()) {
      t.answer_ms = it->value("answer_ms", std::int64_t{0});
      t.total_ms = it->value("total_ms", std::int64_t{0});
    }
    return t;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("bad trace JSON: ") + e.what());
  }
}

std::string trace_to_string(const RunTrace& trace, TraceJsonOptions options) {
  return trace_to_json(trace, options).dump(2, ' ', false, Json::error_handler_t::replace) + "\n";
}

RunTrace load_trace_file(const std::string& path) {
  auto text = detail::read_file(path);
  try {
    return trace_from_json(Json::parse(text));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, "bad trace file " + path + ": " + e.what());
  }
}

std::string trace_file_stem(std::string_view question_id) {
  std::string out;
  for (char c : question_id) {
    const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '-' || c == '_' || c == '.';
    out.push_back(safe ? c : '_');
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

}  // namespace graph_anchor
