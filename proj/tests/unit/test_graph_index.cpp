#include <doctest.h>

#include <nlohmann/json.hpp>

#include "graph_anchor/error.hpp"
#include "graph_anchor/graph_index.hpp"
#include "test_support.hpp"

using namespace graph_anchor;

namespace {

KnowledgeGraph red_lodge_graph() {
  KnowledgeGraph g;
  g.add_triple("Red Lodge", "county seat", "Carbon County");
  return g;
}

bool is_supergraph(const KnowledgeGraph& big, const KnowledgeGraph& small) {
  for (const auto& e : small.entities()) {
    if (!big.find(e.key)) return false;
  }
  for (const auto& t : small.triples()) {
    if (!big.contains(t)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("canonicalize folds case and collapses whitespace") {
  CHECK(canonicalize("Red Lodge") == "red lodge");
  CHECK(canonicalize("  Carbon   County ") == "carbon county");
  CHECK(canonicalize("Zürich\tHB") == "zürich hb");
  CHECK_THROWS_AS(canonicalize("   "), Error);
  try {
    (void)canonicalize("");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyName);
  }
}

TEST_CASE("upsert") {
  KnowledgeGraph g;
  g.upsert_entity(Entity::named("Red Lodge"));
  CHECK(g.entities().size() == 1);

  SUBCASE("incoming attributes win, new ones are appended") {
    KnowledgeGraph h;
    h.upsert_entity(Entity::named("Red Lodge", {{"type", "town"}}));
    h.upsert_entity(Entity::named("red  lodge", {{"type", "city"}, {"state", "Montana"}}));
    REQUIRE(h.entities().size() == 1);
    const auto& e = h.entities().front();
    CHECK(e.display == "Red Lodge");
    CHECK(e.attributes == AttributeMap{{"type", "city"}, {"state", "Montana"}});
  }

  SUBCASE("idempotent") {
    KnowledgeGraph once;
    once.upsert_entity(Entity::named("Red Lodge", {{"type", "town"}}));
    KnowledgeGraph twice = once;
    twice.upsert_entity(Entity::named("Red Lodge", {{"type", "town"}}));
    CHECK(once == twice);
  }
}

TEST_CASE("add_triple") {
  auto g = red_lodge_graph();
  CHECK(stats(g) == GraphStats{2, 1});
  CHECK(g.contains(Triple{"red lodge", "county seat", "carbon county"}));

  g.add_triple("red lodge", "county seat", "CARBON COUNTY");
  CHECK(g.triples().size() == 1);

  KnowledgeGraph h;
  CHECK_THROWS_AS(h.add_triple("a", "", "b"), Error);
  CHECK_THROWS_AS(h.add_triple("a", "   ", "b"), Error);
  CHECK_THROWS_AS(h.add_triple(" ", "rel", "b"), Error);
  CHECK(h.empty());
}

TEST_CASE("merge") {
  const auto g = red_lodge_graph();
  CHECK(merge(KnowledgeGraph{}, g) == g);
  CHECK(merge(g, g) == g);

  KnowledgeGraph ab;
  ab.upsert_entity(Entity::named("a"));
  ab.add_triple("a", "r", "b");
  KnowledgeGraph bc;
  bc.upsert_entity(Entity::named("b"));
  bc.upsert_entity(Entity::named("c"));
  const auto m = merge(ab, bc);
  CHECK(stats(m) == GraphStats{3, 1});
}

TEST_CASE("diff") {
  const auto g = red_lodge_graph();
  CHECK(diff(g, g).empty());
  const auto all = diff(KnowledgeGraph{}, g);
  CHECK(all.added_entities.size() == 2);
  CHECK(all.added_triples.size() == 1);

  KnowledgeGraph a;
  a.upsert_entity(Entity::named("a"));
  KnowledgeGraph ab = a;
  ab.add_triple("a", "to", "b");
  const auto d = diff(a, ab);
  CHECK(d.added_entities.size() == 1);
  CHECK(d.added_entities.front().key == "b");
  CHECK(d.added_triples.size() == 1);
}

TEST_CASE("linearize") {
  CHECK(linearize(KnowledgeGraph{}) == "<graph>\nEntities:\nRelations:\n</graph>");

  KnowledgeGraph g;
  g.upsert_entity(Entity::named("Red Lodge", {{"type", "town"}}));
  CHECK(linearize(g).find("\n- Red Lodge (type: town)\n") != std::string::npos);

  const auto text = linearize(red_lodge_graph());
  CHECK(text ==
        "<graph>\nEntities:\n- Red Lodge\n- Carbon County\nRelations:\n"
        "- (Red Lodge, county seat, Carbon County)\n</graph>");
}

TEST_CASE("parse_graph tolerance") {
  auto parsed = parse_graph("<graph>\nEntities:\n- X\nRelations:\n- (X, knows, Y)\n</graph>");
  CHECK(stats(parsed.graph) == GraphStats{2, 1});
  CHECK(parsed.graph.find("y")->display == "Y");
  CHECK(parsed.warnings.empty());

  CHECK_THROWS_AS(parse_graph("Entities:\n- X"), Error);
  CHECK_THROWS_AS(parse_graph("<graph>\nEntities:\n- X"), Error);

  SUBCASE("bullets, casing and inline lists") {
    auto p = parse_graph(
        "prefix <GRAPH>\n"
        "nodes: Alpha (kind: a), Beta\n"
        "* Gamma (born: 1941; place: Red Lodge, Montana)\n"
        "2. Delta (the band)\n"
        "EDGES:\n"
        "• (Alpha, likes, Beta)\n"
        "1) (Gamma, lives in, Beta)\n"
        "- broken line without commas\n"
        "</Graph> suffix");
    CHECK(stats(p.graph) == GraphStats{4, 2});
    CHECK(*p.graph.find("gamma")->attributes.find("place") == "Red Lodge, Montana");
    CHECK(p.graph.find("delta (the band)") != nullptr);
    CHECK(*p.graph.find("alpha")->attributes.find("kind") == "a");
    REQUIRE(p.warnings.size() == 1);
    CHECK(p.warnings.front().kind == GraphWarningKind::MalformedTripleLine);
  }

  SUBCASE("relation with commas splits at the outer commas") {
    auto p = parse_graph("<graph>\nRelations:\n- (A, won, in 1999, B)\n</graph>");
    REQUIRE(p.graph.triples().size() == 1);
    CHECK(p.graph.triples().front().relation == "won, in 1999");
  }

  SUBCASE("comma separated attributes and continuation values") {
    auto p = parse_graph("<graph>\nEntities:\n- A (x: 1, y: 2, 3)\n</graph>");
    const auto& attrs = p.graph.find("a")->attributes;
    CHECK(*attrs.find("x") == "1");
    CHECK(*attrs.find("y") == "2, 3");
  }
}

TEST_CASE("stats") {
  CHECK(stats(KnowledgeGraph{}) == GraphStats{0, 0});
  CHECK(stats(red_lodge_graph()) == GraphStats{2, 1});
}

TEST_CASE("json round trip and validation") {
  testing::Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const auto g = testing::random_graph(rng);
    CHECK(graph_from_json(graph_to_json(g)) == g);
    const auto d = diff(KnowledgeGraph{}, g);
    CHECK(to_graph(delta_from_json(delta_to_json(d))) == g);
  }
  auto j = graph_to_json(red_lodge_graph());
  j["entities"][0]["key"] = "elsewhere";
  CHECK_THROWS_AS(graph_from_json(j), Error);
  auto dangling = graph_to_json(red_lodge_graph());
  dangling["entities"].erase(1);
  CHECK_THROWS_AS(graph_from_json(dangling), Error);
}

TEST_CASE("property: linearize round trip on random graphs") {
  testing::Rng rng(20240101);
  for (int i = 0; i < 1000; ++i) {
    const auto g = testing::random_graph(rng, 10, 14);
    const auto text = linearize(g);
    const auto parsed = parse_graph(text);
    INFO(text);
    REQUIRE(parsed.graph == g);
    CHECK(parsed.warnings.empty());
  }
}

TEST_CASE("property: merge algebra on random pairs") {
  testing::Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const auto a = testing::random_graph(rng);
    const auto b = testing::random_related_graph(rng, a);
    const auto m = merge(a, b);
    REQUIRE(merge(m, b) == m);
    REQUIRE(merge(a, a) == a);
    REQUIRE(is_supergraph(m, a));
    REQUIRE(is_supergraph(m, b));
    const auto d = diff(a, m);
    REQUIRE(same_keys_and_triples(merge(a, to_graph(d)), m));
    REQUIRE(same_keys_and_triples(merge(a, to_graph(diff(a, b))), m));
    REQUIRE(diff(m, m).empty());
    for (const auto& t : m.triples()) {
      REQUIRE(m.find(t.head) != nullptr);
      REQUIRE(m.find(t.tail) != nullptr);
    }
  }
}
