#pragma once

#include <stdexcept>
#include <string>

namespace hoisynth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (shape, range, finiteness).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A numerical routine produced NaN/inf or diverged.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A file could not be parsed or has an incompatible version.
class FormatError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidInput(message);
}

}  // namespace hoisynth
