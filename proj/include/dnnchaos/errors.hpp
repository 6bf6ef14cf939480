#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace dnnchaos {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Configuration is geometrically degenerate (singular frames, points inside a hull, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// A request exceeded a declared desk-scale limit.
class RefusedError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced during evaluation. Carries the offending
/// coordinate and, once propagated through a network, the layer index.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t coordinate,
               std::optional<std::size_t> layer = std::nullopt)
      : Error(what), coordinate_(coordinate), layer_(layer) {}

  std::size_t coordinate() const noexcept { return coordinate_; }
  std::optional<std::size_t> layer() const noexcept { return layer_; }

 private:
  std::size_t coordinate_;
  std::optional<std::size_t> layer_;
};

/// Iterative solver failed to meet its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace dnnchaos
