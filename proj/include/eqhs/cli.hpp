#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eqhs::cli {

/// Stable exit codes.
enum ExitCode : int {
  kSuccess = 0,      // success / controllable / converged
  kInputError = 1,   // bad flags, unreadable or malformed files
  kNegative = 2,     // uncontrollable topology or run that did not converge
};

/// Runs the command line `eqhs <args...>` (args excludes the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eqhs::cli
