#include "http_util.hpp"

#include <httplib.h>

#include "graph_anchor/error.hpp"

namespace graph_anchor::detail {

HttpEndpoint parse_endpoint(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(ErrorCode::InvalidConfig, "endpoint must start with http:// or https://");
  }
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::InvalidConfig, "unsupported endpoint scheme '" + std::string(scheme) + "'");
  }
  auto rest = url.substr(scheme_end + 3);
  auto slash = rest.find('/');
  auto authority = rest.substr(0, slash);
  if (authority.empty()) throw Error(ErrorCode::InvalidConfig, "endpoint has no host");
  HttpEndpoint ep;
  ep.origin = std::string(url.substr(0, scheme_end + 3)) + std::string(authority);
  if (slash != std::string_view::npos) {
    auto path = rest.substr(slash);
    while (!path.empty() && path.back() == '/') path.remove_suffix(1);
    ep.base_path = std::string(path);
  }
  return ep;
}

HttpReply post_json(const HttpEndpoint& endpoint, std::string_view path, const std::string& body,
                    const std::string& bearer_token, std::chrono::milliseconds timeout) {
  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
  auto full_path = endpoint.base_path + std::string(path);
  auto res = client.Post(full_path, headers, body, "application/json");
  if (!res) {
    throw Error(ErrorCode::Transport,
                "POST " + endpoint.origin + full_path + " failed: " + httplib::to_string(res.error()));
  }
  return HttpReply{res->status, res->body};
}

}  // namespace graph_anchor::detail
