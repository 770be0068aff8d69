#pragma once

#include <stdexcept>
#include <string>

namespace tk {

// Error taxonomy. The CLI maps the families below onto exit codes:
// ConfigError -> 2, DataError (and subclasses) -> 3, NumericError -> 4.

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct SizeError : std::length_error {
  using std::length_error::length_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : DataError {
  using DataError::DataError;
};

struct IntegrityError : DataError {
  using DataError::DataError;
};

struct MetricError : std::domain_error {
  using std::domain_error::domain_error;
};

}  // namespace tk
