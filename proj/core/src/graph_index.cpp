#include "graph_anchor/graph_index.hpp"

#include <functional>
#include <nlohmann/json.hpp>

#include "graph_anchor/error.hpp"
#include "text_util.hpp"

namespace graph_anchor {

using detail::ifind;
using detail::is_space;
using detail::trim;

std::string canonicalize(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  bool pending_space = false;
  for (char c : name) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
  }
  if (out.empty()) {
    throw Error(ErrorCode::EmptyName, "entity name is empty after normalization");
  }
  return out;
}

// --- AttributeMap ----------------------------------------------------------

AttributeMap::AttributeMap(std::initializer_list<value_type> init) {
  for (const auto& [name, value] : init) set(name, value);
}

void AttributeMap::set(std::string name, std::string value) {
  for (auto& item : items_) {
    if (item.first == name) {
      item.second = std::move(value);
      return;
    }
  }
  items_.emplace_back(std::move(name), std::move(value));
}

const std::string* AttributeMap::find(std::string_view name) const {
  for (const auto& item : items_) {
    if (item.first == name) return &item.second;
  }
  return nullptr;
}

Entity Entity::named(std::string_view display, AttributeMap attributes) {
  Entity e;
  e.key = canonicalize(display);
  e.display = std::string(trim(display));
  e.attributes = std::move(attributes);
  return e;
}

// --- KnowledgeGraph --------------------------------------------------------

std::size_t KnowledgeGraph::TripleHash::operator()(const Triple& t) const noexcept {
  std::hash<std::string> h;
  std::size_t seed = h(t.head);
  seed ^= h(t.relation) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
  seed ^= h(t.tail) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
  return seed;
}

void KnowledgeGraph::upsert_entity(const Entity& entity) {
  auto it = entity_index_.find(entity.key);
  if (it == entity_index_.end()) {
    entity_index_.emplace(entity.key, entities_.size());
    entities_.push_back(entity);
    return;
  }
  auto& existing = entities_[it->second];
  for (const auto& [name, value] : entity.attributes) existing.attributes.set(name, value);
}

void KnowledgeGraph::insert_triple_unchecked(Triple triple) {
  if (triple_set_.contains(triple)) return;
  triple_set_.insert(triple);
  triples_.push_back(std::move(triple));
}

void KnowledgeGraph::add_triple(std::string_view head_display, std::string_view relation,
                                std::string_view tail_display) {
  auto rel = trim(relation);
  if (rel.empty()) throw Error(ErrorCode::InvalidTriple, "relation is empty");
  auto head = Entity::named(head_display);
  auto tail = Entity::named(tail_display);
  Triple t{head.key, std::string(rel), tail.key};
  if (!find(head.key)) upsert_entity(head);
  if (!find(tail.key)) upsert_entity(tail);
  insert_triple_unchecked(std::move(t));
}

void KnowledgeGraph::add_triple(const Triple& triple) {
  auto rel = trim(triple.relation);
  if (rel.empty()) throw Error(ErrorCode::InvalidTriple, "relation is empty");
  if (triple.head.empty() || triple.tail.empty()) {
    throw Error(ErrorCode::InvalidTriple, "triple endpoint is empty");
  }
  for (const auto* key : {&triple.head, &triple.tail}) {
    if (!find(*key)) upsert_entity(Entity{*key, *key, {}});
  }
  insert_triple_unchecked(Triple{triple.head, std::string(rel), triple.tail});
}

const Entity* KnowledgeGraph::find(std::string_view key) const {
  auto it = entity_index_.find(std::string(key));
  return it == entity_index_.end() ? nullptr : &entities_[it->second];
}

bool KnowledgeGraph::contains(const Triple& triple) const {
  return triple_set_.contains(triple);
}

// --- algebra ---------------------------------------------------------------

KnowledgeGraph merge(const KnowledgeGraph& base, const KnowledgeGraph& incoming) {
  KnowledgeGraph out = base;
  for (const auto& e : incoming.entities()) out.upsert_entity(e);
  for (const auto& t : incoming.triples()) out.add_triple(t);
  return out;
}

GraphDelta diff(const KnowledgeGraph& previous, const KnowledgeGraph& next) {
  GraphDelta delta;
  for (const auto& e : next.entities()) {
    if (!previous.find(e.key)) delta.added_entities.push_back(e);
  }
  for (const auto& t : next.triples()) {
    if (!previous.contains(t)) delta.added_triples.push_back(t);
  }
  return delta;
}

KnowledgeGraph to_graph(const GraphDelta& delta) {
  KnowledgeGraph g;
  for (const auto& e : delta.added_entities) g.upsert_entity(e);
  for (const auto& t : delta.added_triples) g.add_triple(t);
  return g;
}

bool same_keys_and_triples(const KnowledgeGraph& a, const KnowledgeGraph& b) {
  if (a.entities().size() != b.entities().size()) return false;
  if (a.triples().size() != b.triples().size()) return false;
  for (const auto& e : a.entities()) {
    if (!b.find(e.key)) return false;
  }
  for (const auto& t : a.triples()) {
    if (!b.contains(t)) return false;
  }
  return true;
}

GraphStats stats(const KnowledgeGraph& graph) noexcept {
  return {graph.entities().size(), graph.triples().size()};
}

// --- linearization ---------------------------------------------------------

std::string linearize(const KnowledgeGraph& graph) {
  std::string out = "<graph>\nEntities:\n";
  for (const auto& e : graph.entities()) {
    out += "- ";
    out += e.display;
    if (!e.attributes.empty()) {
      out += " (";
      bool first = true;
      for (const auto& [name, value] : e.attributes) {
        if (!first) out += "; ";
        first = false;
        out += name;
        out += ": ";
        out += value;
      }
      out += ")";
    }
    out += "\n";
  }
  out += "Relations:\n";
  for (const auto& t : graph.triples()) {
    out += "- (";
    out += graph.find(t.head)->display;
    out += ", ";
    out += t.relation;
    out += ", ";
    out += graph.find(t.tail)->display;
    out += ")\n";
  }
  out += "</graph>";
  return out;
}

// --- parsing ---------------------------------------------------------------

namespace {

enum class Section { Unknown, Entities, Relations };

// Recognizes "Entities:" / "Relations:" style headers. On success sets the
// section and returns whatever followed the colon on the same line.
std::optional<std::string_view> match_header(std::string_view line, Section& section) {
  static constexpr std::pair<std::string_view, Section> kHeaders[] = {
      {"entities", Section::Entities}, {"nodes", Section::Entities},
      {"relations", Section::Relations}, {"triples", Section::Relations},
      {"edges", Section::Relations},
  };
  for (const auto& [word, sec] : kHeaders) {
    if (!detail::istarts_with(line, word)) continue;
    auto rest = trim(line.substr(word.size()));
    if (rest.empty()) {
      section = sec;
      return rest;
    }
    if (rest.front() == ':') {
      section = sec;
      return trim(rest.substr(1));
    }
  }
  return std::nullopt;
}

std::string_view strip_bullet(std::string_view s) {
  s = trim(s);
  if (!s.empty() && (s.front() == '-' || s.front() == '*')) return trim(s.substr(1));
  if (s.starts_with("•")) return trim(s.substr(3));
  std::size_t digits = 0;
  while (digits < s.size() && s[digits] >= '0' && s[digits] <= '9') ++digits;
  if (digits > 0 && digits < s.size() && (s[digits] == '.' || s[digits] == ')') &&
      digits + 1 < s.size() && is_space(s[digits + 1])) {
    return trim(s.substr(digits + 1));
  }
  return s;
}

// Splits on any of `delims` outside parentheses.
std::vector<std::string_view> split_top_level(std::string_view s, std::string_view delims) {
  std::vector<std::string_view> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '(') ++depth;
    else if (c == ')' && depth > 0) --depth;
    else if (depth == 0 && delims.find(c) != std::string_view::npos) {
      parts.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  parts.push_back(trim(s.substr(start)));
  return parts;
}

void warn(std::vector<GraphWarning>& out, GraphWarningKind kind, std::string_view line,
          std::string message) {
  out.push_back({kind, std::string(line), std::move(message)});
}

bool parse_attributes(std::string_view inner, AttributeMap& attrs, std::string& problem) {
  const char sep = inner.find(';') != std::string_view::npos ? ';' : ',';
  std::string last_name;
  std::size_t start = 0;
  while (start <= inner.size()) {
    auto end = inner.find(sep, start);
    auto piece = trim(inner.substr(start, end == std::string_view::npos ? end : end - start));
    start = end == std::string_view::npos ? inner.size() + 1 : end + 1;
    if (piece.empty()) continue;
    auto colon = piece.find(':');
    if (colon == std::string_view::npos) {
      // Continuation of a value that itself contained the separator.
      if (last_name.empty()) {
        problem = "attribute without a name: '" + std::string(piece) + "'";
        return false;
      }
      std::string joined = *attrs.find(last_name);
      joined += sep;
      joined += ' ';
      joined += piece;
      attrs.set(last_name, std::move(joined));
      continue;
    }
    auto name = trim(piece.substr(0, colon));
    auto value = trim(piece.substr(colon + 1));
    if (name.empty()) {
      problem = "attribute without a name: '" + std::string(piece) + "'";
      return false;
    }
    last_name = std::string(name);
    attrs.set(last_name, std::string(value));
  }
  return true;
}

void parse_entity_item(std::string_view item, KnowledgeGraph& graph,
                       std::vector<GraphWarning>& warnings) {
  std::string_view name = item;
  AttributeMap attrs;
  if (!item.empty() && item.back() == ')') {
    int depth = 0;
    std::size_t open = std::string_view::npos;
    for (std::size_t i = item.size(); i-- > 0;) {
      if (item[i] == ')') ++depth;
      else if (item[i] == '(' && --depth == 0) {
        open = i;
        break;
      }
    }
    if (open != std::string_view::npos) {
      auto inner = item.substr(open + 1, item.size() - open - 2);
      auto head = trim(item.substr(0, open));
      if (!head.empty() && inner.find(':') != std::string_view::npos) {
        std::string problem;
        if (!parse_attributes(inner, attrs, problem)) {
          warn(warnings, GraphWarningKind::MalformedEntityLine, item, problem);
          return;
        }
        name = head;
      }
    }
  }
  try {
    graph.upsert_entity(Entity::named(name, std::move(attrs)));
  } catch (const Error& e) {
    warn(warnings, GraphWarningKind::MalformedEntityLine, item, e.what());
  }
}

void parse_triple_item(std::string_view item, KnowledgeGraph& graph,
                       std::vector<GraphWarning>& warnings) {
  auto body = item;
  if (body.size() >= 2 && body.front() == '(' && body.back() == ')') {
    body = trim(body.substr(1, body.size() - 2));
  }
  auto first = body.find(',');
  auto last = body.rfind(',');
  if (first == std::string_view::npos || first == last) {
    warn(warnings, GraphWarningKind::MalformedTripleLine, item,
         "expected (head, relation, tail)");
    return;
  }
  auto head = trim(body.substr(0, first));
  auto relation = trim(body.substr(first + 1, last - first - 1));
  auto tail = trim(body.substr(last + 1));
  if (head.empty() || relation.empty() || tail.empty()) {
    warn(warnings, GraphWarningKind::MalformedTripleLine, item, "empty triple field");
    return;
  }
  try {
    graph.add_triple(head, relation, tail);
  } catch (const Error& e) {
    warn(warnings, GraphWarningKind::MalformedTripleLine, item, e.what());
  }
}

void parse_item(std::string_view item, Section section, KnowledgeGraph& graph,
                std::vector<GraphWarning>& warnings) {
  item = strip_bullet(item);
  if (item.empty()) return;
  switch (section) {
    case Section::Entities: parse_entity_item(item, graph, warnings); break;
    case Section::Relations: parse_triple_item(item, graph, warnings); break;
    case Section::Unknown:
      if (item.front() == '(') parse_triple_item(item, graph, warnings);
      else parse_entity_item(item, graph, warnings);
      break;
  }
}

}  // namespace

GraphParse parse_graph(std::string_view text) {
  static constexpr std::string_view kOpen = "<graph>";
  static constexpr std::string_view kClose = "</graph>";
  auto open = ifind(text, kOpen);
  if (open == std::string_view::npos) {
    throw Error(ErrorCode::NoGraphBlock, "no <graph> block found");
  }
  auto body_start = open + kOpen.size();
  auto close = ifind(text, kClose, body_start);
  if (close == std::string_view::npos) {
    throw Error(ErrorCode::NoGraphBlock, "<graph> block is not closed");
  }

  GraphParse result;
  Section section = Section::Unknown;
  for (auto raw : detail::split_lines(text.substr(body_start, close - body_start))) {
    auto line = trim(raw);
    if (line.empty()) continue;
    if (auto rest = match_header(line, section)) {
      if (rest->empty()) continue;
      // Inline form: "Entities: A, B (type: x)" or "Relations: (a, r, b), (c, r, d)".
      for (auto item : split_top_level(*rest, ",;")) {
        if (section == Section::Relations && !item.empty() && item.front() != '(') {
          warn(result.warnings, GraphWarningKind::MalformedTripleLine, item,
               "inline triples must be parenthesized");
          continue;
        }
        parse_item(item, section, result.graph, result.warnings);
      }
      continue;
    }
    parse_item(line, section, result.graph, result.warnings);
  }
  return result;
}

// --- JSON ------------------------------------------------------------------

namespace {

Json entity_to_json(const Entity& e) {
  Json attrs = Json::object();
  for (const auto& [name, value] : e.attributes) attrs[name] = value;
  return Json{{"key", e.key}, {"display", e.display}, {"attributes", std::move(attrs)}};
}

Json triple_to_json(const Triple& t) {
  return Json{{"head", t.head}, {"relation", t.relation}, {"tail", t.tail}};
}

Entity entity_from_json(const Json& j) {
  Entity e;
  e.display = j.at("display").get<std::string>();
  e.key = j.contains("key") ? j.at("key").get<std::string>() : canonicalize(e.display);
  if (e.key != canonicalize(e.display)) {
    throw Error(ErrorCode::MalformedRecord,
                "entity key '" + e.key + "' does not match display '" + e.display + "'");
  }
  if (j.contains("attributes")) {
    for (const auto& [name, value] : j.at("attributes").items()) {
      if (name.empty()) throw Error(ErrorCode::MalformedRecord, "empty attribute name");
      e.attributes.set(name, value.get<std::string>());
    }
  }
  return e;
}

Triple triple_from_json(const Json& j) {
  return Triple{j.at("head").get<std::string>(), j.at("relation").get<std::string>(),
                j.at("tail").get<std::string>()};
}

}  // namespace

Json graph_to_json(const KnowledgeGraph& graph) {
  Json entities = Json::array();
  for (const auto& e : graph.entities()) entities.push_back(entity_to_json(e));
  Json triples = Json::array();
  for (const auto& t : graph.triples()) triples.push_back(triple_to_json(t));
  return Json{{"entities", std::move(entities)}, {"triples", std::move(triples)}};
}

KnowledgeGraph graph_from_json(const Json& j) {
  try {
    KnowledgeGraph g;
    for (const auto& e : j.at("entities")) g.upsert_entity(entity_from_json(e));
    for (const auto& t : j.at("triples")) {
      auto triple = triple_from_json(t);
      if (!g.find(triple.head) || !g.find(triple.tail)) {
        throw Error(ErrorCode::MalformedRecord, "triple endpoint is not a listed entity");
      }
      g.add_triple(triple);
    }
    return g;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("bad graph JSON: ") + e.what());
  }
}

Json delta_to_json(const GraphDelta& delta) {
  Json entities = Json::array();
  for (const auto& e : delta.added_entities) entities.push_back(entity_to_json(e));
  Json triples = Json::array();
  for (const auto& t : delta.added_triples) triples.push_back(triple_to_json(t));
  return Json{{"entities", std::move(entities)}, {"triples", std::move(triples)}};
}

GraphDelta delta_from_json(const Json& j) {
  try {
    GraphDelta d;
    for (const auto& e : j.at("entities")) d.added_entities.push_back(entity_from_json(e));
    for (const auto& t : j.at("triples")) d.added_triples.push_back(triple_from_json(t));
    return d;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("bad delta JSON: ") + e.what());
  }
}

}  // namespace graph_anchor
