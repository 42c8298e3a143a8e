#pragma once

#include <stdexcept>
#include <string>

namespace churn {

// Exception hierarchy. The CLI maps each family to an exit code:
// InvalidInput -> 2, NumericFailure -> 3, IoError -> 4.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class NumericFailure : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A node without enough events to build log-rank scores.
class DegenerateNode : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// The censoring survivor function is zero where an IPCW weight is needed.
class EvaluationHorizonError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Model file whose checksum, magic or version does not match.
class CorruptModel : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace churn
