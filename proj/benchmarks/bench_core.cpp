#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "graph_anchor/graph_index.hpp"
#include "graph_anchor/retrieval.hpp"

using namespace graph_anchor;

namespace {

std::vector<Document> synthetic_corpus(std::size_t docs, std::size_t vocab, std::size_t words) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, vocab - 1);
  std::vector<Document> out;
  out.reserve(docs);
  for (std::size_t i = 0; i < docs; ++i) {
    Document d;
    d.id = "doc" + std::to_string(i);
    d.title = "t" + std::to_string(pick(rng));
    for (std::size_t w = 0; w < words; ++w) d.text += "w" + std::to_string(pick(rng)) + " ";
    out.push_back(std::move(d));
  }
  return out;
}

KnowledgeGraph chain_graph(int entities) {
  KnowledgeGraph g;
  for (int i = 0; i + 1 < entities; ++i) {
    g.add_triple("Entity " + std::to_string(i), "linked to", "Entity " + std::to_string(i + 1));
  }
  return g;
}

}  // namespace

static void BM_Bm25Score(benchmark::State& state) {
  const auto index = CorpusIndex::from_documents(synthetic_corpus(static_cast<std::size_t>(state.range(0)), 2000, 80));
  for (auto _ : state) benchmark::DoNotOptimize(index.score("w1 w17 w230 t5 w999", 5));
}
BENCHMARK(BM_Bm25Score)->Arg(1000)->Arg(10000);

static void BM_Ingest(benchmark::State& state) {
  const auto docs = synthetic_corpus(static_cast<std::size_t>(state.range(0)), 2000, 80);
  for (auto _ : state) benchmark::DoNotOptimize(CorpusIndex::from_documents(docs));
}
BENCHMARK(BM_Ingest)->Arg(1000);

static void BM_Linearize(benchmark::State& state) {
  const auto g = chain_graph(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(linearize(g));
}
BENCHMARK(BM_Linearize)->Arg(20)->Arg(200);

static void BM_ParseGraph(benchmark::State& state) {
  const auto text = linearize(chain_graph(static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(parse_graph(text));
}
BENCHMARK(BM_ParseGraph)->Arg(20)->Arg(200);

static void BM_Merge(benchmark::State& state) {
  const auto a = chain_graph(static_cast<int>(state.range(0)));
  auto b = chain_graph(static_cast<int>(state.range(0)) / 2);
  b.add_triple("Entity 0", "also", "Outsider");
  for (auto _ : state) benchmark::DoNotOptimize(merge(a, b));
}
BENCHMARK(BM_Merge)->Arg(200);
BENCHMARK_MAIN();
