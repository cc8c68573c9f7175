// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace promptmil {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the primitive or layer they were fed to.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad user input: configs, manifests, CLI arguments, precondition failures.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf values, diverged losses, non-finite gradients.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary file. `offset` is the byte position where parsing failed.
class FormatError : public ValidationError {
 public:
  FormatError(std::string path, std::uint64_t offset, const std::string& what)
      : ValidationError(path + " @" + std::to_string(offset) + ": " + what),
        path_(std::move(path)),
        offset_(offset) {}

  const std::string& path() const noexcept { return path_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::string path_;
  std::uint64_t offset_;
};

}  // namespace promptmil
