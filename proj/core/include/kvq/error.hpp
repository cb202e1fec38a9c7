#pragma once

#include <stdexcept>
#include <string>

namespace kvq {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise unusable input values.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Operation called in the wrong order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// A quantity is mathematically undefined for the given input.
class UndefinedError : public Error {
 public:
  using Error::Error;
};

/// Training diverged; carries the step at which the loss went non-finite.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace kvq
