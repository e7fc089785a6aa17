#pragma once

// The evolving entity/relation graph that serves as the retrieval-time index.
//
// Entities are identified by a canonical key (case-folded, whitespace
// collapsed surface form). Both entities and triples keep insertion order,
// which is also the order used when the graph is linearized into prompt text.
// The graph only grows: there is no removal operation.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "graph_anchor/json_fwd.hpp"

namespace graph_anchor {

/// Lowercase (ASCII), trim and collapse internal whitespace runs.
/// Throws Error(EmptyName) when nothing is left.
std::string canonicalize(std::string_view name);

/// Insertion-ordered attribute map; names are unique.
class AttributeMap {
 public:
  using value_type = std::pair<std::string, std::string>;
  using const_iterator = std::vector<value_type>::const_iterator;

  AttributeMap() = default;
  AttributeMap(std::initializer_list<value_type> init);

  /// Inserts, or overwrites the value in place when the name already exists.
  void set(std::string name, std::string value);
  [[nodiscard]] const std::string* find(std::string_view name) const;
  [[nodiscard]] bool empty() const noexcept { return items_.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }
  [[nodiscard]] const_iterator begin() const noexcept { return items_.begin(); }
  [[nodiscard]] const_iterator end() const noexcept { return items_.end(); }

  friend bool operator==(const AttributeMap&, const AttributeMap&) = default;

 private:
  std::vector<value_type> items_;
};

struct Entity {
  std::string key;
  std::string display;
  AttributeMap attributes;

  /// Builds an entity from a surface form; the key is derived from it.
  static Entity named(std::string_view display, AttributeMap attributes = {});

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct Triple {
  std::string head;  // canonical key
  std::string relation;
  std::string tail;  // canonical key

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct GraphDelta {
  std::vector<Entity> added_entities;
  std::vector<Triple> added_triples;

  [[nodiscard]] bool empty() const noexcept {
    return added_entities.empty() && added_triples.empty();
  }
};

struct GraphStats {
  std::size_t entity_count = 0;
  std::size_t triple_count = 0;

  friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

class KnowledgeGraph {
 public:
  /// New key: appended. Existing key: attributes merged with the incoming
  /// values winning; the original display name is kept.
  void upsert_entity(const Entity& entity);

  /// Adds a triple between surface forms. Missing endpoints are created with
  /// empty attributes. Duplicates are ignored. Throws Error(InvalidTriple) if
  /// the relation is blank and Error(EmptyName) if an endpoint is blank.
  void add_triple(std::string_view head_display, std::string_view relation,
                  std::string_view tail_display);

  /// Same as above for a triple already expressed in canonical keys; any
  /// missing endpoint is created using the key as its display name.
  void add_triple(const Triple& triple);

  [[nodiscard]] const Entity* find(std::string_view key) const;
  [[nodiscard]] bool contains(const Triple& triple) const;

  [[nodiscard]] const std::vector<Entity>& entities() const noexcept { return entities_; }
  [[nodiscard]] const std::vector<Triple>& triples() const noexcept { return triples_; }
  [[nodiscard]] bool empty() const noexcept { return entities_.empty(); }

  /// Order-sensitive structural equality.
  friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    return a.entities_ == b.entities_ && a.triples_ == b.triples_;
  }

 private:
  struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept;
  };

  void insert_triple_unchecked(Triple triple);

  std::vector<Entity> entities_;
  std::unordered_map<std::string, std::size_t> entity_index_;
  std::vector<Triple> triples_;
  std::unordered_set<Triple, TripleHash> triple_set_;
};

/// base with every incoming entity upserted, then every incoming triple added.
KnowledgeGraph merge(const KnowledgeGraph& base, const KnowledgeGraph& incoming);

/// Entities whose key is new in `next`, and triples new in `next`.
GraphDelta diff(const KnowledgeGraph& previous, const KnowledgeGraph& next);

/// Materializes a delta as a standalone graph (endpoints that live only in the
/// base graph are created bare, keyed by their canonical key).
KnowledgeGraph to_graph(const GraphDelta& delta);

/// True when both graphs have the same entity key set and the same triple set,
/// ignoring order and attributes.
bool same_keys_and_triples(const KnowledgeGraph& a, const KnowledgeGraph& b);

GraphStats stats(const KnowledgeGraph& graph) noexcept;

/// Prompt-embeddable text form:
///
///   <graph>
///   Entities:
///   - Red Lodge (type: town; state: Montana)
///   Relations:
///   - (Red Lodge, county seat, Carbon County)
///   </graph>
std::string linearize(const KnowledgeGraph& graph);

enum class GraphWarningKind { MalformedEntityLine, MalformedTripleLine, Note };

struct GraphWarning {
  GraphWarningKind kind;
  std::string line;
  std::string message;
};

struct GraphParse {
  KnowledgeGraph graph;
  std::vector<GraphWarning> warnings;
};

/// Tolerant inverse of linearize over the first <graph>...</graph> span.
/// Throws Error(NoGraphBlock) only when the delimiters are missing; bad lines
/// are collected as warnings and skipped.
GraphParse parse_graph(std::string_view text);

Json graph_to_json(const KnowledgeGraph& graph);
KnowledgeGraph graph_from_json(const Json& j);
Json delta_to_json(const GraphDelta& delta);
GraphDelta delta_from_json(const Json& j);

}  // namespace graph_anchor
