#pragma once

#include <stdexcept>
#include <string>

namespace stgan {

// Base of every error the library throws. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (CSV rows, alignment, empty series).
class DataError : public Error {
 public:
  using Error::Error;
};

// A caller broke an API precondition (backward before forward, missing grads).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// Checkpoint / dataset mismatch detected while loading.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Two injected anomalies claim the same camera at the same time.
class ConflictError : public Error {
 public:
  using Error::Error;
};

}  // namespace stgan
