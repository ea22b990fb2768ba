#pragma once

#include <stdexcept>
#include <string>

namespace abc {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable persisted data.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Configuration file or command-line problem (exit code 2 in the CLI).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace abc
