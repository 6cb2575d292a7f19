#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mycoeval {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitGateFailed = 1,  // --fail-on-fn tripped, manifest deviates
  kExitUsage = 2,
  kExitDataError = 3,
};

/// Runs the tool on `args` (without the program name). All output goes to
/// the given streams, which keeps every subcommand testable in-process.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mycoeval
