#pragma once

#include <stdexcept>
#include <string>

namespace powlab {

/// Invalid configuration or parameters. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that fails validation (malformed rows, non-monotone timestamps). CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quadrature, root finding or training that did not converge. CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace powlab
