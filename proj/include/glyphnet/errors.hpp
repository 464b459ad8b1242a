#pragma once

#include <stdexcept>
#include <string>

namespace glyphnet {

// Error taxonomy mirrors the CLI exit codes: config 2, data 3, divergence 4.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Contract violations (bad shapes, invalid arguments) use std::invalid_argument.
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace glyphnet
