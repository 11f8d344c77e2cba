#pragma once

#include <stdexcept>
#include <string>

namespace mapsel {

// Error categories map one-to-one onto CLI exit codes (see tools/mapsel_cli.cpp).

/// Bad arguments: out-of-range indices, dimension mismatches, unknown names.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent configuration, e.g. a prior that gives zero mass to an admissible size.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A combinatorial scan would exceed its enumeration cap.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite intermediate values (log-likelihood, penalties, fits).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mapsel
