#pragma once

#include <nlohmann/json_fwd.hpp>

namespace graph_anchor {

// Insertion-ordered JSON so persisted files keep a stable, readable key order.
using Json = nlohmann::ordered_json;

}  // namespace graph_anchor
