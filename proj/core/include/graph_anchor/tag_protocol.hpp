#pragma once

// Prompt construction for the step and answer turns, and parsing of the
// tagged blocks the model emits: <graph>, <notes>, <think>, <judgement>,
// <query> and <answer>.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graph_anchor/graph_index.hpp"
#include "graph_anchor/retrieval.hpp"

namespace graph_anchor {

enum class Sufficiency { Sufficient, Insufficient };

std::string_view to_string(Sufficiency s) noexcept;

struct ReasoningBlock {
  std::string think;
  Sufficiency judgement = Sufficiency::Insufficient;

  friend bool operator==(const ReasoningBlock&, const ReasoningBlock&) = default;
};

/// One parsed step turn. next_query is set iff the judgement is Insufficient.
struct StepOutput {
  KnowledgeGraph graph;
  std::optional<std::string> notes;  // text-index mode only
  ReasoningBlock reasoning;
  std::optional<std::string> next_query;
  std::vector<std::string> warnings;
};

enum class TemplateName { Init, Update, Answer, TextIndexUpdate, NoGraphReason };

inline constexpr std::array kAllTemplateNames = {
    TemplateName::Init, TemplateName::Update, TemplateName::Answer,
    TemplateName::TextIndexUpdate, TemplateName::NoGraphReason};

/// File stem used in a template directory ("init", "update", ...).
std::string_view to_string(TemplateName name) noexcept;

/// Placeholders ({question}, {documents}, ...) each template must contain exactly once.
std::span<const std::string_view> required_placeholders(TemplateName name) noexcept;

struct PromptTemplate {
  TemplateName name;
  std::string body;

  /// Throws Error(MissingPlaceholder) or, for a repeated placeholder,
  /// Error(InvalidTemplate).
  void validate() const;
};

/// The five templates used by a pipeline. Defaults are compiled in from the
/// files under core/templates/.
class TemplateSet {
 public:
  static TemplateSet defaults();
  /// Loads `<dir>/<name>.txt` for every template present; missing files fall
  /// back to the defaults. Every loaded template is validated.
  static TemplateSet load_dir(const std::string& dir);

  [[nodiscard]] const PromptTemplate& get(TemplateName name) const;
  void set(PromptTemplate tmpl);

 private:
  std::array<PromptTemplate, kAllTemplateNames.size()> templates_{};
};

enum class AnswerMode { DocsAndGraph, DocsOnly, GraphOnly };

enum class IndexKind { Graph, Notes, None };

/// "Doc [i] (Title): text" blocks, 1-based, separated by blank lines.
std::string render_documents(std::span<const Document> docs);

/// <think>..</think> followed by <judgement>..</judgement>.
std::string render_reasoning(const ReasoningBlock& reasoning);

/// Inverse of render_reasoning. Throws like parse_step_output for the
/// judgement; a missing <think> yields an empty trace.
ReasoningBlock parse_reasoning(std::string_view text);

std::string build_init_prompt(std::string_view question, std::span<const Document> docs,
                              const PromptTemplate& tmpl);

/// Conditions on the previous turn: its graph (or notes), its reasoning, and
/// the query that produced `docs`.
std::string build_update_prompt(std::string_view question, std::span<const Document> docs,
                                const StepOutput& previous, std::string_view previous_query,
                                const PromptTemplate& tmpl);

/// Step prompt for the templates that may run at step 1 as well as later
/// (text_index_update, no_graph_reason). `previous` is null on the first step.
std::string build_step_prompt(std::string_view question, std::span<const Document> docs,
                              const StepOutput* previous, std::string_view previous_query,
                              const PromptTemplate& tmpl);

std::string build_answer_prompt(std::string_view question, std::span<const Document> docs,
                                const KnowledgeGraph& final_graph, AnswerMode mode,
                                const PromptTemplate& tmpl);

/// Same, with an already rendered index block (e.g. a <notes> summary).
std::string build_answer_prompt(std::string_view question, std::span<const Document> docs,
                                std::string_view index_block, AnswerMode mode,
                                const PromptTemplate& tmpl);

/// Content of the first <tag>...</tag> block (case-insensitive tag match), untrimmed.
std::optional<std::string> extract_tag(std::string_view text, std::string_view tag);

/// Throws Error(NoGraphBlock) (graph kind), Error(MissingJudgement),
/// Error(InvalidJudgement) or Error(QueryMissing).
StepOutput parse_step_output(std::string_view text, IndexKind index = IndexKind::Graph);

struct AnswerParse {
  std::string answer;
  std::vector<std::string> warnings;
};

/// Trimmed first <answer> block, or the whole trimmed text when the tag is
/// missing. Throws Error(EmptyAnswer).
AnswerParse parse_answer(std::string_view text);

}  // namespace graph_anchor
