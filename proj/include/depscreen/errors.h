// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_ERRORS_H_
#define DEPSCREEN_ERRORS_H_

#include <stdexcept>
#include <string>

namespace depscreen {

// Base of every error the library raises. `kind()` is a short stable tag
// used by the CLI and the HTTP layer to map errors onto exit codes and
// status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "shape"; }
};

// NaN or Inf produced or consumed where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric"; }
};

// Bad user-supplied value (label, threshold, flag, payload field...).
class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "validation"; }
};

// Malformed input file or payload. Carries the 1-based line when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, long line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message
                       : message),
        line_(line) {}
  long line() const noexcept { return line_; }
  const char* kind() const noexcept override { return "parse"; }

 private:
  long line_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "not_found"; }
};

class ConflictError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "conflict"; }
};

// Checkpoint container problems: truncation, checksum, version.
class FormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "format"; }
};

class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
  const char* kind() const noexcept override { return "unsupported_version"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace depscreen

#endif  // DEPSCREEN_ERRORS_H_
