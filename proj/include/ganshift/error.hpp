#pragma once

#include <stdexcept>
#include <string>

namespace ganshift {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or dimensions disagree with a backend declaration.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value, range violation, or unlabeled parameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite value encountered during evaluation or optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Reference image cannot be distinguished from its domain-A analog.
class DomainGapError : public Error {
 public:
  using Error::Error;
};

// File, checkpoint or serialization failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ganshift
