#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rationalift::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kNumeric = 3 };

// Parses `args` (without the program name) and runs the chosen subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rationalift::cli
