#pragma once

#include <stdexcept>
#include <string>

namespace nrdr {

// Error taxonomy. The three classes map onto the process exit codes used by
// the CLI (config = 2, data = 3, numeric = 4); anything else is treated as a
// data error at the boundary.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nrdr
