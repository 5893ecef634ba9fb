#pragma once

#include <stdexcept>
#include <string>

namespace msos {

/// Invalid parameters or mismatched inputs. CLI exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure during a computation. CLI exit code 2.
struct RuntimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File read/write failure. CLI exit code 3.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace msos
