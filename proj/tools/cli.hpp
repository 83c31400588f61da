#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace spikecode::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kValidation = 2,
  kIo = 3,
  kDivergence = 4,
};

/// Runs one invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spikecode::cli
