#pragma once

#include <stdexcept>
#include <string>

namespace semgeo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of two operands disagree, or a raster is too small for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument lies outside its documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A reduction has nothing to reduce over (empty mask, no valid pixels).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a type invariant (label out of range, nonpositive depth).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values showed up where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration text; the message names the offending line.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A file does not match the expected raster format.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace semgeo
