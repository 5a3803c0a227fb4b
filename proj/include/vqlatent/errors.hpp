#pragma once

#include <stdexcept>
#include <string>

namespace vql {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A substitution found no span shared by the two premises.
class NoAnchorError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Malformed user input (token ids, sentences, config values).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values reached an operation that requires finite input.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace vql
