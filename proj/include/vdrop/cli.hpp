#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vdrop/errors.hpp"

namespace vdrop::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,
  kExitUsage = 2,
  kExitNumerical = 3,
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures; reported with the offending path and mapped to exit 2.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Runs the `vdrop` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vdrop::cli
