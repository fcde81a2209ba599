#pragma once

#include <stdexcept>
#include <string>

namespace icdpipe {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments, configuration or file contents detected before any work.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Network-level failure that survived the retry policy.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Request exceeded its deadline.
class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// The endpoint answered, but not with the expected JSON shape.
class MalformedResponseError : public Error {
 public:
  using Error::Error;
};

/// The endpoint does not implement the requested capability.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// The comparison/rate graph is not strongly connected; no unique stationary
/// distribution exists.
class NotIrreducibleError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

/// Ids of two aligned collections do not match one-to-one.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

class UnknownModelError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class InvalidPatternError : public Error {
 public:
  InvalidPatternError(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class BudgetTooSmallError : public Error {
 public:
  using Error::Error;
};

class MissingPredictionError : public Error {
 public:
  MissingPredictionError(std::string id, const std::string& what)
      : Error(what), id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace icdpipe
