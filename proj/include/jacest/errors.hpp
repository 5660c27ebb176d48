#pragma once

#include <stdexcept>
#include <string>

namespace jacest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  /// Short machine-readable category, printed by the CLI.
  virtual const char* kind() const noexcept { return "error"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "shape"; }
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_argument"; }
};

class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

class SingularPoint : public DomainError {
 public:
  using DomainError::DomainError;
  const char* kind() const noexcept override { return "singular_point"; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric"; }
};

class EmptyTrainingSet : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "empty_training_set"; }
};

class EmptyFilteredSet : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "empty_filtered_set"; }
};

class FormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "format"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace jacest
