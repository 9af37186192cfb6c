#pragma once

#include <string>
#include <vector>

namespace kifmm::cli {

enum ExitCode { ok = 0, failure = 1, usage = 2, not_converged = 3 };

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args);

}  // namespace kifmm::cli
