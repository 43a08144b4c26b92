#pragma once

#include <iosfwd>

namespace fedtheory::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeFailure = 1,
  kConfigError = 2,
  kVerificationFailure = 3,
};

/// Entry point shared by the executable and the CLI tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fedtheory::cli
