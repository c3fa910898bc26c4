#pragma once

#include <stdexcept>
#include <string>

namespace mcd {

// Base of every error thrown by the library. The C API maps each subclass onto
// a status code, the CLI maps those onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters, malformed configuration, violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data that is inconsistent or outside the domain of an operation.
class DataError : public Error {
 public:
  using Error::Error;
};

// Filesystem and container format failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// An internal invariant did not hold (e.g. negative Poisson expectation).
class InvariantError : public Error {
 public:
  using Error::Error;
};

// Optimisation diverged or produced non-finite values.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage needs an artifact that an upstream stage has not produced.
class MissingDependencyError : public Error {
 public:
  MissingDependencyError(std::string stage, const std::string& what)
      : Error(what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace mcd
