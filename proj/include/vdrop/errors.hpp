#pragma once

#include <stdexcept>
#include <string>

namespace vdrop {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Argument inside the domain but outside the supported evaluation range.
class RangeError : public Error {
 public:
  using Error::Error;
};

// A series or iteration failed to meet its tolerance within the term cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

// Training objective became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed config, checkpoint or dataset file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vdrop
