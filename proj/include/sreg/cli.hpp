#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sreg {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitInput = 3,
  kExitNumeric = 4,
  kExitCapacity = 5,
};

/// Entry point of the `sreg` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sreg
