#pragma once

#include <stdexcept>
#include <string>

namespace dynsyn {

// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Invalid configuration or parameter combination.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Simulation produced a non-finite state.
struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unknown name in a catalog.
struct LookupError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Malformed or mismatched file.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dynsyn
