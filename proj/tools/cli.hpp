#pragma once

#include <string>
#include <vector>

namespace brushplan::cli {

/// Runs the brushplan command line (args exclude the program name).
/// Returns the process exit status; errors are reported on stderr.
int run(const std::vector<std::string>& args);

}  // namespace brushplan::cli
