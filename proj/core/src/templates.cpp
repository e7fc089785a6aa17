#include <filesystem>

#include "graph_anchor/error.hpp"
#include "graph_anchor/tag_protocol.hpp"
#include "text_util.hpp"

namespace graph_anchor {

namespace detail {
extern const std::string_view kDefaultInitTemplate;
extern const std::string_view kDefaultUpdateTemplate;
extern const std::string_view kDefaultAnswerTemplate;
extern const std::string_view kDefaultTextIndexUpdateTemplate;
extern const std::string_view kDefaultNoGraphReasonTemplate;
}  // namespace detail

namespace {

std::size_t slot(TemplateName name) { return static_cast<std::size_t>(name); }

std::string_view default_body(TemplateName name) {
  switch (name) {
    case TemplateName::Init: return detail::kDefaultInitTemplate;
    case TemplateName::Update: return detail::kDefaultUpdateTemplate;
    case TemplateName::Answer: return detail::kDefaultAnswerTemplate;
    case TemplateName::TextIndexUpdate: return detail::kDefaultTextIndexUpdateTemplate;
    case TemplateName::NoGraphReason: return detail::kDefaultNoGraphReasonTemplate;
  }
  return {};
}

}  // namespace

TemplateSet TemplateSet::defaults() {
  TemplateSet set;
  for (auto name : kAllTemplateNames) set.set(PromptTemplate{name, std::string(default_body(name))});
  return set;
}

TemplateSet TemplateSet::load_dir(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::InvalidConfig, "template directory not found: " + dir);
  }
  TemplateSet set = defaults();
  for (auto name : kAllTemplateNames) {
    auto path = std::filesystem::path(dir) / (std::string(to_string(name)) + ".txt");
    if (!std::filesystem::exists(path)) continue;
    auto tmpl = PromptTemplate{name, detail::read_file(path.string())};
    tmpl.validate();
    set.set(std::move(tmpl));
  }
  return set;
}

const PromptTemplate& TemplateSet::get(TemplateName name) const { return templates_[slot(name)]; }

void TemplateSet::set(PromptTemplate tmpl) {
  const auto i = slot(tmpl.name);
  templates_[i] = std::move(tmpl);
}

}  // namespace graph_anchor
