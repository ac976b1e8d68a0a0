#pragma once

#include <stdexcept>
#include <string>

namespace logonet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values; the message lists every violation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated serialized data.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Dataset records that reference missing files or unknown instances.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace logonet
