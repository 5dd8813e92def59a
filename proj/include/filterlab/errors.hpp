#pragma once

#include <stdexcept>
#include <string>

namespace filterlab {

// Invalid scenario or model configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A solver or estimator left its numerical domain (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace filterlab
