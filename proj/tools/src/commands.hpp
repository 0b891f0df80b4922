#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cinerecon::cli {

enum ExitCode : int { kOk = 0, kUnexpected = 1, kConfigError = 2, kDataError = 3, kNumericalError = 4 };

/// Full command-line entry point; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cinerecon::cli
