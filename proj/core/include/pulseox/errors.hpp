#pragma once

#include <stdexcept>
#include <string>

namespace pulseox {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A spec/config value is out of range (bad filter band, zero window, ...).
class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

// Array/sequence dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input is too short for the requested operation.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// A label lookup had nothing to look into.
class MissingLabelError : public Error {
 public:
  using Error::Error;
};

// A file could not be parsed; message names the offending line.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Numerically degenerate input (rank-deficient fit, vanishing denominator).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace pulseox
