#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fastreact {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain where an evaluator is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Reaction function does not have the increasing/decreasing/increasing profile.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Plotnikov maps requested for a reaction function with min F' <= -1.
class ValidityError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent user input (initial data, solver settings, sample counts).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A space-time cell holds too few samples for averaging.
class PartitionError : public Error {
 public:
  using Error::Error;
};

/// Least-squares rate fit cannot be formed.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Newton iteration of the per-cell reaction solve did not converge.
class StepFailure : public Error {
 public:
  StepFailure(std::size_t cell, const std::string& what)
      : Error(what), cell_(cell) {}
  std::size_t cell() const noexcept { return cell_; }

 private:
  std::size_t cell_;
};

/// Config text rejected; carries the offending line (1-based, 0 if global) and key.
class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, std::string key, const std::string& what)
      : Error("config line " + std::to_string(line) + " [" + key + "]: " + what),
        line_(line),
        key_(std::move(key)) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::size_t line_;
  std::string key_;
};

}  // namespace fastreact
