#pragma once

// Thin wrapper over cpp-httplib shared by the chat and embedding backends.

#include <chrono>
#include <string>
#include <string_view>

namespace graph_anchor::detail {

struct HttpEndpoint {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // path prefix without trailing slash, may be empty
};

/// Throws Error(InvalidConfig) for anything that is not http(s)://host[:port][/path].
HttpEndpoint parse_endpoint(std::string_view url);

struct HttpReply {
  int status = 0;
  std::string body;
};

/// Throws Error(Transport) when no HTTP response was received.
HttpReply post_json(const HttpEndpoint& endpoint, std::string_view path, const std::string& body,
                    const std::string& bearer_token, std::chrono::milliseconds timeout);

}  // namespace graph_anchor::detail
