#include <doctest.h>

#include <nlohmann/json.hpp>

#include "graph_anchor/error.hpp"
#include "graph_anchor/orchestrator.hpp"
#include "test_support.hpp"

using namespace graph_anchor;

namespace {

struct World {
  std::shared_ptr<const CorpusIndex> index = std::make_shared<const CorpusIndex>(
      CorpusIndex::ingest_file(testing::fixture_path("golden/corpus.jsonl")));
  Bm25Retriever bm25{index};
  testing::CountingRetriever retriever{bm25};
  TemplateSet templates = TemplateSet::defaults();
};

PipelineConfig config_for(PipelineMode mode, int top_k = 3) {
  PipelineConfig c;
  c.mode = mode;
  c.top_k = top_k;
  return c;
}

KnowledgeGraph graph_of(std::initializer_list<std::array<const char*, 3>> triples) {
  KnowledgeGraph g;
  for (const auto& t : triples) g.add_triple(t[0], t[1], t[2]);
  return g;
}

const char* kQuestion = "In which county was the composer of Harbor Lights Suite born?";
const std::string kAnswer = "<answer>Carbon County</answer>";

std::size_t occurrences(const std::string& hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

bool superset(const KnowledgeGraph& big, const KnowledgeGraph& small) {
  for (const auto& e : small.entities()) {
    if (!big.find(e.key)) return false;
  }
  for (const auto& t : small.triples()) {
    if (!big.contains(t)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("two-step run: insufficient then sufficient") {
  World w;
  const auto g1 = graph_of({{"Harbor Lights Suite", "composed by", "Elena Marsh"}});
  const auto g2 = graph_of({{"Elena Marsh", "born in", "Red Lodge"}});
  ScriptedBackend llm({{"q:step:1", testing::step_response(g1, false, "Q2 Elena Marsh")},
                       {"q:step:2", testing::step_response(g2, true)},
                       {"q:answer", kAnswer}});
  const auto trace = run_query(kQuestion, config_for(PipelineMode::GraphAnchor),
                               {w.retriever, llm, w.templates}, "q");
  REQUIRE(trace.steps.size() == 2);
  CHECK(trace.termination == Termination::Sufficient);
  CHECK(trace.answer == "Carbon County");
  CHECK(trace.llm_calls == 3);
  CHECK(llm.calls() == 3);
  CHECK(w.retriever.queries == std::vector<std::string>{kQuestion, "Q2 Elena Marsh"});
  CHECK(trace.steps[1].query_in == "Q2 Elena Marsh");

  // The second turn dropped the first triple; the index keeps it.
  CHECK(superset(trace.steps[1].graph_after, trace.steps[0].graph_after));
  CHECK(stats(trace.final_graph) == GraphStats{3, 2});
  CHECK(trace.steps[1].delta.added_entities.size() == 1);
  CHECK(trace.steps[1].delta.added_triples.size() == 1);

  std::vector<std::vector<Document>> per_step;
  for (const auto& s : trace.steps) per_step.push_back(s.retrieved_docs);
  CHECK(trace.aggregated_docs == aggregate(per_step));
}

TEST_CASE("golden trace matches the checked-in file") {
  const auto run = testing::run_golden();
  CHECK(run.produced == run.expected);
  CHECK(run.trace.steps.size() == 2);
  CHECK(run.llm_calls == 3);
  CHECK(trace_to_string(trace_from_json(Json::parse(run.produced))) == run.produced);
}

TEST_CASE("always insufficient stops at max_steps") {
  World w;
  std::vector<Fixture> fx;
  for (int t = 1; t <= 4; ++t) {
    fx.push_back({"q:step:" + std::to_string(t),
                  testing::step_response(graph_of({{"Elena Marsh", "step", std::to_string(t).c_str()}}),
                                         false, "Elena Marsh query " + std::to_string(t))});
  }
  fx.push_back({"q:answer", kAnswer});
  ScriptedBackend llm(fx);
  const auto trace = run_query(kQuestion, config_for(PipelineMode::GraphAnchor),
                               {w.retriever, llm, w.templates}, "q");
  CHECK(trace.steps.size() == 4);
  CHECK(trace.termination == Termination::MaxSteps);
  CHECK(trace.llm_calls == 5);
  CHECK(llm.remaining() == 0);
  for (std::size_t t = 1; t < trace.steps.size(); ++t) {
    CHECK(trace.steps[t].query_in == *trace.steps[t - 1].next_query);
    CHECK(trace.steps[t].retrieved_docs == w.bm25.retrieve(*trace.steps[t - 1].next_query, 3));
    CHECK(superset(trace.steps[t].graph_after, trace.steps[t - 1].graph_after));
  }
}

TEST_CASE("first step may already be sufficient") {
  World w;
  ScriptedBackend llm({{"q:step:1", testing::step_response({}, true)}, {"q:answer", kAnswer}});
  const auto trace = run_query(kQuestion, config_for(PipelineMode::GraphAnchor),
                               {w.retriever, llm, w.templates}, "q");
  CHECK(trace.steps.size() == 1);
  CHECK(trace.termination == Termination::Sufficient);
  CHECK(trace.llm_calls == 2);
}

TEST_CASE("parse failures are retried, then degrade") {
  World w;
  SUBCASE("recovered on retry") {
    ScriptedBackend llm({{"q:step:1:retry:1", testing::step_response({}, true)},
                         {"q:step:1", "<think>no judgement</think>"},
                         {"q:answer", kAnswer}});
    testing::RecordingModel rec(llm);
    const auto trace = run_query(kQuestion, config_for(PipelineMode::GraphAnchor),
                                 {w.retriever, rec, w.templates}, "q");
    REQUIRE(trace.steps.size() == 1);
    CHECK(trace.steps[0].attempts == 2);
    CHECK_FALSE(trace.steps[0].parse_error.has_value());
    CHECK(trace.termination == Termination::Sufficient);
    REQUIRE(rec.requests.size() == 3);
    CHECK(rec.requests[0].request_tag == "q:step:1");
    CHECK(rec.requests[1].request_tag == "q:step:1:retry:1");
    CHECK(rec.requests[1].prompt == rec.requests[0].prompt);
  }
  SUBCASE("persistent failure answers from the context gathered so far") {
    const auto g1 = graph_of({{"Harbor Lights Suite", "composed by", "Elena Marsh"}});
    ScriptedBackend llm({{"q:step:1", testing::step_response(g1, false, "Elena Marsh")},
                         {"q:step:2", "<graph> unterminated"},
                         {"q:step:2", "<judgement>perhaps</judgement>"},
                         {"q:step:2", "nothing"},
                         {"q:answer", kAnswer}});
    testing::RecordingModel rec(llm);
    const auto trace = run_query(kQuestion, config_for(PipelineMode::GraphAnchor),
                                 {w.retriever, rec, w.templates}, "q");
    CHECK(trace.termination == Termination::ParseFailure);
    REQUIRE(trace.steps.size() == 2);
    CHECK(trace.steps[1].attempts == 3);
    CHECK(trace.steps[1].parse_error.has_value());
    CHECK(trace.steps[1].graph_after == trace.steps[0].graph_after);
    CHECK(trace.final_graph == g1);
    CHECK(trace.answer == "Carbon County");
    CHECK(trace.aggregated_docs.size() >= trace.steps[0].retrieved_docs.size());
    CHECK(rec.requests.back().prompt.find(linearize(g1)) != std::string::npos);
  }
  SUBCASE("unsearchable subquery ends retrieval") {
    ScriptedBackend llm({{"q:step:1", testing::step_response({}, false, "?!")}, {"q:answer", kAnswer}});
    const auto trace = run_query(kQuestion, config_for(PipelineMode::GraphAnchor),
                                 {w.retriever, llm, w.templates}, "q");
    CHECK(trace.termination == Termination::ParseFailure);
    CHECK(trace.steps.size() == 1);
    CHECK(trace.answer == "Carbon County");
  }
  SUBCASE("unusable answer leaves an empty answer and a warning") {
    ScriptedBackend llm({{"q:step:1", testing::step_response({}, true)},
                         {"q:answer", "<answer> </answer>"},
                         {"q:answer", "<answer></answer>"},
                         {"q:answer", "   "}});
    const auto trace = run_query(kQuestion, config_for(PipelineMode::GraphAnchor),
                                 {w.retriever, llm, w.templates}, "q");
    CHECK(trace.answer.empty());
    CHECK(trace.llm_calls == 4);
    CHECK_FALSE(trace.answer_warnings.empty());
  }
}

TEST_CASE("non-parse errors propagate from run_query and are recorded by run_query_recorded") {
  World w;
  ScriptedBackend llm({{"q:step:1", testing::step_response({}, false, "Elena Marsh")}});
  CHECK_THROWS_AS(run_query(kQuestion, config_for(PipelineMode::GraphAnchor),
                            {w.retriever, llm, w.templates}, "q"),
                  Error);
  ScriptedBackend llm2({{"q:step:1", testing::step_response({}, false, "Elena Marsh")}});
  const auto trace = run_query_recorded(kQuestion, config_for(PipelineMode::GraphAnchor),
                                        {w.retriever, llm2, w.templates}, "q");
  CHECK(trace.failed());
  CHECK(trace.error.has_value());
  CHECK(trace.steps.size() == 1);
  CHECK_FALSE(trace.aggregated_docs.empty());

  ScriptedBackend unused({});
  CHECK_THROWS_AS(run_query("  ", config_for(PipelineMode::GraphAnchor), {w.retriever, unused, w.templates}),
                  Error);
  auto bad = config_for(PipelineMode::GraphAnchor);
  bad.max_steps = 0;
  CHECK_THROWS_AS(run_query(kQuestion, bad, {w.retriever, unused, w.templates}), Error);
}

TEST_CASE("ablation: vanilla RAG") {
  World w;
  ScriptedBackend llm({{"q:step:1", testing::step_response({}, false, "ignored follow-up")},
                       {"q:answer", kAnswer}});
  testing::RecordingModel rec(llm);
  const auto trace = run_query(kQuestion, config_for(PipelineMode::VanillaRAG),
                               {w.retriever, rec, w.templates}, "q");
  CHECK(trace.steps.size() == 1);
  CHECK(w.retriever.queries == std::vector<std::string>{kQuestion});
  CHECK(trace.llm_calls == 2);
  CHECK(trace.final_graph.empty());
  CHECK(trace.answer == "Carbon County");
  CHECK(rec.requests.back().prompt.find("Doc [1]") != std::string::npos);
  CHECK(rec.requests.back().prompt.find("<graph>") == std::string::npos);
}

TEST_CASE("ablation: answer modes") {
  World w;
  const auto g1 = graph_of({{"Elena Marsh", "born in", "Red Lodge"}});
  for (auto mode : {PipelineMode::QAGraphOnly, PipelineMode::QADocsOnly, PipelineMode::GraphAnchor}) {
    ScriptedBackend llm({{"q:step:1", testing::step_response(g1, true)}, {"q:answer", kAnswer}});
    testing::RecordingModel rec(llm);
    const auto trace = run_query(kQuestion, config_for(mode), {w.retriever, rec, w.templates}, "q");
    const auto& prompt = rec.requests.back().prompt;
    const bool has_docs = prompt.find("Doc [") != std::string::npos;
    const bool has_graph = prompt.find(linearize(g1)) != std::string::npos;
    CAPTURE(to_string(mode));
    CHECK(trace.final_graph == g1);
    CHECK(has_docs == (mode != PipelineMode::QAGraphOnly));
    CHECK(has_graph == (mode != PipelineMode::QADocsOnly));
  }
}

TEST_CASE("ablation: text index carries notes, never a graph") {
  World w;
  ScriptedBackend llm(
      {{"q:step:1",
        "<notes>Harbor Lights Suite was composed by Elena Marsh.</notes>\n<think>need birthplace</think>\n"
        "<judgement>insufficient</judgement><query>Elena Marsh born</query>"},
       {"q:step:2",
        "<graph>\nEntities:\n- Stray\nRelations:\n</graph>\n<notes>Elena Marsh was born in Red Lodge.</notes>\n"
        "<judgement>sufficient</judgement>"},
       {"q:answer", kAnswer}});
  testing::RecordingModel rec(llm);
  const auto trace = run_query(kQuestion, config_for(PipelineMode::TextIndex), {w.retriever, rec, w.templates}, "q");
  REQUIRE(trace.steps.size() == 2);
  CHECK(trace.final_graph.empty());
  for (const auto& s : trace.steps) CHECK(s.graph_after.empty());
  CHECK(trace.final_notes == std::optional<std::string>("Elena Marsh was born in Red Lodge."));
  CHECK(rec.requests[1].prompt.find("<notes>Harbor Lights Suite was composed by Elena Marsh.</notes>") !=
        std::string::npos);
  CHECK(rec.requests[2].prompt.find("<notes>Elena Marsh was born in Red Lodge.</notes>") != std::string::npos);

  const auto j = trace_to_json(trace);
  CHECK_FALSE(j.contains("final_graph"));
  for (const auto& s : j.at("steps")) {
    CHECK_FALSE(s.contains("graph"));
    CHECK_FALSE(s.contains("delta"));
    CHECK(s.contains("notes"));
  }
}

TEST_CASE("ablation: no graph mode keeps the loop without an index") {
  World w;
  ScriptedBackend llm({{"q:step:1", "<think>t</think><judgement>insufficient</judgement><query>Elena Marsh</query>"},
                       {"q:step:2", "<think>t2</think><judgement>sufficient</judgement>"},
                       {"q:answer", kAnswer}});
  testing::RecordingModel rec(llm);
  const auto trace = run_query(kQuestion, config_for(PipelineMode::NoGraph), {w.retriever, rec, w.templates}, "q");
  CHECK(trace.steps.size() == 2);
  CHECK(trace.termination == Termination::Sufficient);
  for (const auto& r : rec.requests) CHECK(r.prompt.find("<graph>\nEntities:") == std::string::npos);
  CHECK(rec.requests[1].prompt.find("<think>t</think>") != std::string::npos);
  const auto j = trace_to_json(trace);
  CHECK_FALSE(j.contains("final_graph"));
  CHECK_FALSE(j.contains("final_notes"));
}

TEST_CASE("run_dataset") {
  World w;
  std::vector<DatasetItem> items;
  std::vector<Fixture> fx;
  for (int i = 0; i < 6; ++i) {
    const auto id = "q" + std::to_string(i);
    items.push_back({id, std::string(kQuestion) + " variant " + std::to_string(i), {"Carbon County"}});
    fx.push_back({id + ":step:1", testing::step_response(graph_of({{"Elena Marsh", "id", id.c_str()}}), false,
                                                          "Elena Marsh " + id)});
    fx.push_back({id + ":step:2", testing::step_response({}, true)});
    fx.push_back({id + ":answer", "<answer>answer " + id + "</answer>"});
  }

  SUBCASE("order, determinism across parallelism") {
    ScriptedBackend one(fx);
    ScriptedBackend four(fx);
    const auto a = run_dataset(items, config_for(PipelineMode::GraphAnchor), {w.bm25, one, w.templates}, 1);
    std::size_t progress_calls = 0;
    const auto b = run_dataset(items, config_for(PipelineMode::GraphAnchor), {w.bm25, four, w.templates}, 4,
                               [&](std::size_t done, std::size_t total, const RunTrace&) {
                                 ++progress_calls;
                                 CHECK(done <= total);
                               });
    CHECK(progress_calls == items.size());
    REQUIRE(a.size() == items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      CHECK(a[i].id == items[i].id);
      CHECK(b[i].id == items[i].id);
      CHECK(trace_to_string(a[i]) == trace_to_string(b[i]));
    }
    CHECK(predictions_to_jsonl(predictions_of(a)) == predictions_to_jsonl(predictions_of(b)));
  }

  SUBCASE("an exhausted question fails alone") {
    std::vector<Fixture> partial;
    for (const auto& f : fx) {
      if (*f.tag != "q2:answer") partial.push_back(f);
    }
    ScriptedBackend llm(partial);
    const auto traces = run_dataset(items, config_for(PipelineMode::GraphAnchor), {w.bm25, llm, w.templates}, 2);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      CAPTURE(i);
      CHECK(traces[i].failed() == (i == 2));
      if (i != 2) CHECK(traces[i].answer == "answer q" + std::to_string(i));
    }
    CHECK(traces[2].steps.size() == 2);
  }

  CHECK_THROWS_AS(run_dataset(items, config_for(PipelineMode::GraphAnchor),
                              {w.bm25, *std::make_unique<EchoBackend>(), w.templates}, 0),
                  Error);
}

TEST_CASE("trace json round trip") {
  World w;
  testing::FuzzModel fuzz(3);
  for (int i = 0; i < 50; ++i) {
    const auto mode = static_cast<PipelineMode>(i % 6);
    const auto trace = run_query_recorded(kQuestion, config_for(mode), {w.bm25, fuzz, w.templates},
                                          "r" + std::to_string(i));
    const auto text = trace_to_string(trace);
    CHECK(trace_to_string(trace_from_json(Json::parse(text))) == text);
    TraceJsonOptions timed{true};
    const auto with_timings = trace_to_string(trace, timed);
    CHECK(trace_to_string(trace_from_json(Json::parse(with_timings)), timed) == with_timings);
  }
  CHECK(trace_file_stem("q/1 x") != "q/1 x");
  CHECK(trace_file_stem("hotpot_001") == "hotpot_001");
}

TEST_CASE("property: termination under random model output") {
  World w;
  for (int retry_limit : {0, 2}) {
    for (std::uint64_t seed = 0; seed < 250; ++seed) {
      testing::FuzzModel fuzz(seed * 7919 + static_cast<std::uint64_t>(retry_limit));
      testing::RecordingModel rec(fuzz);
      auto config = config_for(static_cast<PipelineMode>(seed % 6));
      config.parse_retry_limit = retry_limit;
      const auto trace = run_query_recorded(kQuestion, config, {w.bm25, rec, w.templates}, "f");
      CAPTURE(seed);
      CHECK_FALSE(trace.failed());
      CHECK(fuzz.calls == trace.llm_calls);
      for (const auto& r : rec.requests) CHECK(occurrences(r.prompt, kQuestion) == 1);
      for (std::size_t t = 1; t < trace.steps.size(); ++t) {
        REQUIRE(trace.steps[t - 1].next_query.has_value());
        CHECK(trace.steps[t].query_in == *trace.steps[t - 1].next_query);
        CHECK(trace.steps[t].retrieved_docs ==
              w.bm25.retrieve(*trace.steps[t - 1].next_query, static_cast<std::size_t>(config.top_k)));
      }
      CHECK(trace.steps.size() >= 1);
      CHECK(trace.steps.size() <= static_cast<std::size_t>(config.max_steps));
      CHECK(fuzz.calls <= static_cast<std::size_t>((config.max_steps + 1) * (retry_limit + 1)));
      if (trace.termination == Termination::Sufficient) {
        CHECK(trace.steps.back().reasoning.judgement == Sufficiency::Sufficient);
      }
      if (index_kind(config.mode) == IndexKind::Graph) {
        for (std::size_t t = 1; t < trace.steps.size(); ++t) {
          CHECK(superset(trace.steps[t].graph_after, trace.steps[t - 1].graph_after));
          CHECK(same_keys_and_triples(
              merge(trace.steps[t - 1].graph_after, to_graph(trace.steps[t].delta)),
              trace.steps[t].graph_after));
        }
      }
    }
  }
}
