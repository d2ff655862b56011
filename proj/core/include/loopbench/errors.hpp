#pragma once

#include <stdexcept>
#include <string>

namespace loopbench {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Query outside the time span of a trajectory.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Point too far from the reference path to be projected.
class ProjectionError : public Error {
 public:
  using Error::Error;
};

/// Constructor arguments violate a type invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or missing configuration (empty map, bad weights, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered inside the optimizer.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Predictions and ground truth do not share the same time grid.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Unknown agent or entity identifier.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario, trace or config document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Generator parameters that cannot produce a valid scenario.
class ParameterError : public Error {
 public:
  using Error::Error;
};

}  // namespace loopbench
