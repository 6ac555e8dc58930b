#pragma once

#include <stdexcept>
#include <string>

namespace dufo {

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad arguments to an in-process API call (non-finite input, misaligned
/// sequences, invalid parameter values, ...).
struct InvalidInputError : Error {
  using Error::Error;
};

/// Malformed file content. Carries "path:line: message" in what().
struct ParseError : Error {
  ParseError(const std::string& path, std::size_t line, const std::string& message)
      : Error(path + ":" + std::to_string(line) + ": " + message) {}
  explicit ParseError(const std::string& message) : Error(message) {}
};

/// Input uses a feature this toolkit deliberately does not handle
/// (e.g. compressed PCD payloads).
struct UnsupportedFeatureError : Error {
  using Error::Error;
};

/// Filesystem-level failure, message names the offending path.
struct IoError : Error {
  using Error::Error;
};

}  // namespace dufo
