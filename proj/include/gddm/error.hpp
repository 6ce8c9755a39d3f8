#pragma once

#include <stdexcept>
#include <string>

namespace gddm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Zero, overflowing or otherwise unusable field dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Two operands that must share a shape do not.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Timestep or element index out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise malformed input data.
class InputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent combination of options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A closed-form expression hit a zero denominator.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step, double last_finite_loss)
      : Error(what), step_(step), last_finite_loss_(last_finite_loss) {}
  long step() const noexcept { return step_; }
  double last_finite_loss() const noexcept { return last_finite_loss_; }

 private:
  long step_;
  double last_finite_loss_;
};

}  // namespace gddm
