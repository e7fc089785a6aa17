#include "graph_anchor/tag_protocol.hpp"

#include <map>

#include "graph_anchor/error.hpp"
#include "text_util.hpp"

namespace graph_anchor {

using detail::trim;

std::string_view to_string(Sufficiency s) noexcept {
  return s == Sufficiency::Sufficient ? "sufficient" : "insufficient";
}

std::string_view to_string(TemplateName name) noexcept {
  switch (name) {
    case TemplateName::Init: return "init";
    case TemplateName::Update: return "update";
    case TemplateName::Answer: return "answer";
    case TemplateName::TextIndexUpdate: return "text_index_update";
    case TemplateName::NoGraphReason: return "no_graph_reason";
  }
  return "unknown";
}

std::span<const std::string_view> required_placeholders(TemplateName name) noexcept {
  static constexpr std::string_view kInit[] = {"question", "documents"};
  static constexpr std::string_view kUpdate[] = {"question", "documents", "previous_graph",
                                                 "previous_reasoning", "previous_query"};
  static constexpr std::string_view kAnswer[] = {"question", "documents", "final_graph"};
  static constexpr std::string_view kNoGraph[] = {"question", "documents", "previous_reasoning",
                                                  "previous_query"};
  switch (name) {
    case TemplateName::Init: return kInit;
    case TemplateName::Update:
    case TemplateName::TextIndexUpdate: return kUpdate;
    case TemplateName::Answer: return kAnswer;
    case TemplateName::NoGraphReason: return kNoGraph;
  }
  return {};
}

namespace {

std::size_t count_occurrences(std::string_view body, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = body.find(needle); pos != std::string_view::npos;
       pos = body.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

bool is_placeholder_char(char c) noexcept { return (c >= 'a' && c <= 'z') || c == '_'; }

// Single pass, so substituted text is never re-scanned for placeholders.
// Braces that do not name a provided placeholder are copied through.
std::string substitute(const PromptTemplate& tmpl,
                       const std::map<std::string_view, std::string_view>& values) {
  tmpl.validate();
  const std::string_view body = tmpl.body;
  std::string out;
  out.reserve(body.size() + 1024);
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      std::size_t j = i + 1;
      while (j < body.size() && is_placeholder_char(body[j])) ++j;
      if (j < body.size() && body[j] == '}' && j > i + 1) {
        auto it = values.find(body.substr(i + 1, j - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = j + 1;
          continue;
        }
      }
    }
    out.push_back(body[i++]);
  }
  return out;
}

void require_template(const PromptTemplate& tmpl, std::initializer_list<TemplateName> allowed) {
  for (auto name : allowed) {
    if (tmpl.name == name) return;
  }
  throw Error(ErrorCode::InvalidTemplate,
              "template '" + std::string(to_string(tmpl.name)) + "' cannot be used here");
}

constexpr std::string_view kNone = "(none)";

}  // namespace

void PromptTemplate::validate() const {
  for (auto placeholder : required_placeholders(name)) {
    const std::string token = "{" + std::string(placeholder) + "}";
    const auto n = count_occurrences(body, token);
    if (n == 0) {
      throw Error(ErrorCode::MissingPlaceholder, "template '" + std::string(to_string(name)) +
                                                     "' lacks " + token);
    }
    if (n > 1) {
      throw Error(ErrorCode::InvalidTemplate, "template '" + std::string(to_string(name)) +
                                                  "' repeats " + token);
    }
  }
}

std::string render_documents(std::span<const Document> docs) {
  std::string out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i) out += "\n\n";
    out += "Doc [" + std::to_string(i + 1) + "]";
    if (!docs[i].title.empty()) out += " (" + docs[i].title + ")";
    out += ": ";
    out += docs[i].text;
  }
  return out;
}

std::string render_reasoning(const ReasoningBlock& reasoning) {
  std::string out = "<think>";
  out += reasoning.think;
  out += "</think>\n<judgement>";
  out += to_string(reasoning.judgement);
  out += "</judgement>";
  return out;
}

std::string build_init_prompt(std::string_view question, std::span<const Document> docs,
                              const PromptTemplate& tmpl) {
  require_template(tmpl, {TemplateName::Init});
  const auto rendered = render_documents(docs);
  return substitute(tmpl, {{"question", question}, {"documents", rendered}});
}

std::string build_step_prompt(std::string_view question, std::span<const Document> docs,
                              const StepOutput* previous, std::string_view previous_query,
                              const PromptTemplate& tmpl) {
  require_template(tmpl, {TemplateName::Update, TemplateName::TextIndexUpdate,
                          TemplateName::NoGraphReason});
  const auto rendered = render_documents(docs);
  std::string index_text;
  std::string reasoning_text;
  if (previous) {
    if (tmpl.name == TemplateName::Update) {
      index_text = linearize(previous->graph);
    } else if (tmpl.name == TemplateName::TextIndexUpdate) {
      index_text = "<notes>" + previous->notes.value_or("") + "</notes>";
    }
    reasoning_text = render_reasoning(previous->reasoning);
  } else {
    index_text = kNone;
    reasoning_text = kNone;
    previous_query = kNone;
  }
  return substitute(tmpl, {{"question", question},
                           {"documents", rendered},
                           {"previous_graph", index_text},
                           {"previous_reasoning", reasoning_text},
                           {"previous_query", previous_query}});
}

std::string build_update_prompt(std::string_view question, std::span<const Document> docs,
                                const StepOutput& previous, std::string_view previous_query,
                                const PromptTemplate& tmpl) {
  return build_step_prompt(question, docs, &previous, previous_query, tmpl);
}

std::string build_answer_prompt(std::string_view question, std::span<const Document> docs,
                                std::string_view index_block, AnswerMode mode,
                                const PromptTemplate& tmpl) {
  require_template(tmpl, {TemplateName::Answer});
  const std::string rendered =
      mode == AnswerMode::GraphOnly ? std::string{} : render_documents(docs);
  const std::string_view index = mode == AnswerMode::DocsOnly ? std::string_view{} : index_block;
  return substitute(tmpl, {{"question", question}, {"documents", rendered}, {"final_graph", index}});
}

std::string build_answer_prompt(std::string_view question, std::span<const Document> docs,
                                const KnowledgeGraph& final_graph, AnswerMode mode,
                                const PromptTemplate& tmpl) {
  const auto index = mode == AnswerMode::DocsOnly ? std::string{} : linearize(final_graph);
  return build_answer_prompt(question, docs, std::string_view{index}, mode, tmpl);
}

// --- parsing ---------------------------------------------------------------

std::optional<std::string> extract_tag(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  auto start = detail::ifind(text, open);
  if (start == std::string_view::npos) return std::nullopt;
  start += open.size();
  auto end = detail::ifind(text, close, start);
  if (end == std::string_view::npos) return std::nullopt;
  return std::string(text.substr(start, end - start));
}

namespace {

Sufficiency parse_judgement(std::string_view text) {
  auto raw = extract_tag(text, "judgement");
  if (!raw) throw Error(ErrorCode::MissingJudgement, "no <judgement> block");
  auto value = trim(*raw);
  if (detail::iequals(value, "sufficient")) return Sufficiency::Sufficient;
  if (detail::iequals(value, "insufficient")) return Sufficiency::Insufficient;
  throw Error(ErrorCode::InvalidJudgement,
              "judgement '" + std::string(value.substr(0, 80)) + "' is neither sufficient nor insufficient");
}

}  // namespace

ReasoningBlock parse_reasoning(std::string_view text) {
  ReasoningBlock r;
  r.judgement = parse_judgement(text);
  if (auto think = extract_tag(text, "think")) r.think = std::string(trim(*think));
  return r;
}

StepOutput parse_step_output(std::string_view text, IndexKind index) {
  StepOutput out;
  switch (index) {
    case IndexKind::Graph: {
      auto parsed = parse_graph(text);
      out.graph = std::move(parsed.graph);
      for (auto& w : parsed.warnings) out.warnings.push_back(w.message + ": " + w.line);
      break;
    }
    case IndexKind::Notes:
      if (auto notes = extract_tag(text, "notes")) {
        out.notes = std::string(trim(*notes));
      } else {
        out.notes = std::string{};
        out.warnings.emplace_back("no <notes> block; using empty notes");
      }
      break;
    case IndexKind::None:
      break;
  }

  if (auto think = extract_tag(text, "think")) {
    out.reasoning.think = std::string(trim(*think));
  } else {
    out.warnings.emplace_back("no <think> block");
  }
  out.reasoning.judgement = parse_judgement(text);

  std::optional<std::string> query;
  if (auto raw = extract_tag(text, "query")) {
    auto q = trim(*raw);
    if (!q.empty()) query = std::string(q);
  }
  if (out.reasoning.judgement == Sufficiency::Insufficient) {
    if (!query) throw Error(ErrorCode::QueryMissing, "insufficient judgement without a <query>");
    out.next_query = std::move(query);
  } else if (query) {
    out.warnings.emplace_back("query dropped because the judgement is sufficient");
  }
  return out;
}

AnswerParse parse_answer(std::string_view text) {
  AnswerParse out;
  if (auto raw = extract_tag(text, "answer")) {
    out.answer = std::string(trim(*raw));
  } else {
    out.answer = std::string(trim(text));
    out.warnings.emplace_back("no <answer> block; using the whole response");
  }
  if (out.answer.empty()) throw Error(ErrorCode::EmptyAnswer, "answer is empty");
  return out;
}

}  // namespace graph_anchor
