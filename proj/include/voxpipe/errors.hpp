// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace voxpipe {

/// Base of every error the library raises on purpose. `kind()` is a stable
/// machine-readable tag used by the CLI when emitting JSON errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept = 0;
};

/// Malformed or out-of-domain input data (non-finite points, bad files).
class InputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "input_error"; }
};

/// Shapes or widths that do not line up (weights vs. features, plan vs. profile).
class StructuralError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "structural_error"; }
};

/// Missing processor types, unexecutable layers and similar setup problems.
class ConfigurationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "configuration_error"; }
};

/// Raised when an exhaustive search is asked to run beyond its size guard.
class RefusalError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "refusal_error"; }
};

/// An internal invariant did not hold. Indicates a bug, not bad input.
class InvariantError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invariant_violation"; }
};

}  // namespace voxpipe
