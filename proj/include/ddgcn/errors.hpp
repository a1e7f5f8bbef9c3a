#pragma once

#include <stdexcept>
#include <string>

namespace ddgcn {

// Error categories map to process exit codes: ConfigError and DataError are
// usage problems (exit 1); NumericError is a runtime failure such as a NaN
// loss (exit 2).

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ddgcn
