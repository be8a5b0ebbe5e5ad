#pragma once

#include <stdexcept>
#include <string>

namespace fedlwf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or precondition on a count/hyperparameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operands whose dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid data values (labels out of range, non-numeric cells, empty sets).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Structurally malformed input files.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Violations of the client/server exchange contract.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedlwf
