#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mixlen {

// Base for all library errors. Subclasses map onto CLI exit codes
// (see tools/mixlen.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs outside a formula's physical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Caller broke a precondition (non-scalar root, empty batch, k > n, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite forward value during a check.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Divergence or non-finite gradient while training.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long epoch = -1)
      : Error(epoch >= 0 ? what + " at epoch " + std::to_string(epoch) : what),
        epoch_(epoch) {}
  long epoch() const { return epoch_; }

 private:
  long epoch_;
};

}  // namespace mixlen
