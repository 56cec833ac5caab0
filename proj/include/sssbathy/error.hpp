#pragma once

#include <stdexcept>
#include <string>

namespace sssbathy {

/// Invalid argument or configuration value.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Geometrically impossible input (e.g. a slant range shorter than the vertical offset).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// API misuse, such as running backward on a graph that was never recorded.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised by the masked losses when a window has no valid pixel; callers skip the window.
class EmptyMaskError : public std::runtime_error {
 public:
  EmptyMaskError() : std::runtime_error("mask has no valid pixel") {}
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sssbathy
