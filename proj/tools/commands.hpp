#pragma once
// Command-line front end. Kept as a library so tests can drive it in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace sbrel::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,            // usage or data error
  kConvergenceWarning = 2  // only with --strict
};

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sbrel::cli
