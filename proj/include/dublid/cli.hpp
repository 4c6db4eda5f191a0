#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dublid {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitUsage = 2,
  kExitNumerical = 3,
};

/// Parses and runs one verb. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dublid
