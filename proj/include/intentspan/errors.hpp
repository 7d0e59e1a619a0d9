#pragma once

#include <stdexcept>
#include <string>

namespace intentspan {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad input: parse failures, schema violations, broken invariants.
/// The CLI maps these to exit code 2.
struct ValidationError : Error {
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// File or stream could not be parsed at all.
struct ParseError : ValidationError {
  explicit ParseError(const std::string& msg) : ValidationError(msg) {}
};

/// Numerical failure at runtime (non-finite loss, diverged training).
/// The CLI maps these to exit code 3.
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

/// A requested capability (e.g. an external encoder adapter) is not
/// available in this build or process.
struct CapabilityError : Error {
  explicit CapabilityError(const std::string& msg) : Error(msg) {}
};

/// A registered external encoder broke its contract (wrong row count,
/// bad dimensions).
struct AdapterError : Error {
  explicit AdapterError(const std::string& msg) : Error(msg) {}
};

}  // namespace intentspan
