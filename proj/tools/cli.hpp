#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace graph_anchor::cli {

/// Runs the command line with `args` excluding the program name.
/// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace graph_anchor::cli
