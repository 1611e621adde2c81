#pragma once

#include <stdexcept>
#include <string>

namespace mscea {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration (bad options, inconsistent grids, missing profile).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or invariant-violating input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Model fitting failure (no events, non-identifiable design, divergence).
class FitError : public Error {
 public:
  using Error::Error;
};

/// Inference failure (too many failed bootstrap replicates, bad plan).
class InferenceError : public Error {
 public:
  using Error::Error;
};

/// Numerical integration failed to reach the requested tolerance.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

}  // namespace mscea
