#pragma once

#include <stdexcept>
#include <string>

namespace lbmhe {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed model/config data: wrong dimensions, missing fields, bad JSON.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Inputs outside the numerical domain of an operation (non-SPD matrix,
/// singular innovation covariance, non-finite gradient).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampler hit its draw cap.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an API precondition (buffer lengths, call order).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Internal consistency check failed; indicates a bug.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace lbmhe
