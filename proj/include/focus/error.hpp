#pragma once

#include <stdexcept>
#include <string>

namespace focus {

/// Invalid hyperparameters, flags, or preconditions on user input.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data (CSV cells, container payloads).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Files that cannot be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A non-finite value showed up where a finite one is required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes passed between internal kernels do not line up.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace focus
