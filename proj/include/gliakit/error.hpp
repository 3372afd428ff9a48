#pragma once

#include <stdexcept>
#include <string>

namespace gliakit {

/// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// File could not be opened, read or written.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Byte stream is not what the format promises (bad magic, truncated header, ...).
struct FormatError : Error {
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

/// Format is recognized but uses a feature the toolkit does not support.
struct UnsupportedError : Error {
  explicit UnsupportedError(const std::string& msg) : Error(msg) {}
};

/// Data violates a documented precondition or invariant.
struct ValidationError : Error {
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

}  // namespace gliakit
