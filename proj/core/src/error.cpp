#include "graph_anchor/error.hpp"

namespace graph_anchor {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyName: return "EmptyName";
    case ErrorCode::InvalidTriple: return "InvalidTriple";
    case ErrorCode::NoGraphBlock: return "NoGraphBlock";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::InvalidTemplate: return "InvalidTemplate";
    case ErrorCode::MissingJudgement: return "MissingJudgement";
    case ErrorCode::InvalidJudgement: return "InvalidJudgement";
    case ErrorCode::QueryMissing: return "QueryMissing";
    case ErrorCode::EmptyAnswer: return "EmptyAnswer";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::RemoteStatus: return "RemoteStatus";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::FixtureExhausted: return "FixtureExhausted";
    case ErrorCode::DuplicateDocId: return "DuplicateDocId";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::string decorate(ErrorCode code, const std::string& message,
                     std::optional<std::size_t> line) {
  std::string out(to_string(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> line)
    : std::runtime_error(decorate(code, message, line)), code_(code), line_(line) {}

}  // namespace graph_anchor
