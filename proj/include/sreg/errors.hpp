#pragma once

#include <stdexcept>
#include <string>

namespace sreg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad dimensions, unknown keys, missing groups.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A required input artifact is missing or malformed.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Dense work requested above the supported size guard.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced during evaluation. `where` names the group,
/// parameter index or step at which it was detected.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::string where = {})
      : Error(where.empty() ? what : what + " [" + where + "]"),
        where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// Training diverged.
class TrainingError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace sreg
