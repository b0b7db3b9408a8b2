#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rfmsim::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kInvariantViolation = 3,
  kSyncFailure = 4,
};

/// Entry point shared by the executable and the tests. args excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rfmsim::cli
