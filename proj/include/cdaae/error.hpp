#pragma once

#include <stdexcept>
#include <string>

namespace cdaae {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or label lengths that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// API called in a state or with arguments it does not support.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files: manifests, configs, checkpoints, images.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace cdaae
