#pragma once

#include <stdexcept>
#include <string>

namespace spikecode {

// Invalid arguments and contract violations are reported with std::invalid_argument.

/// File could not be read, written or parsed.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss or weights.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace spikecode
