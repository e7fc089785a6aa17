#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace graph_anchor {

enum class ErrorCode {
  // graph_index
  EmptyName,
  InvalidTriple,
  NoGraphBlock,
  // tag_protocol
  MissingPlaceholder,
  InvalidTemplate,
  MissingJudgement,
  InvalidJudgement,
  QueryMissing,
  EmptyAnswer,
  // llm_client
  Transport,
  RemoteStatus,
  RateLimited,
  FixtureExhausted,
  // retrieval
  DuplicateDocId,
  MalformedRecord,
  EmptyQuery,
  // evaluation
  IdMismatch,
  // configuration and file access
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure the engine raises. The code is the stable, testable part;
/// the message is for humans. Record-oriented failures carry a 1-based line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
};

}  // namespace graph_anchor
