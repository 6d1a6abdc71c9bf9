#pragma once

#include <stdexcept>
#include <string>

namespace cnv {

// Inconsistent layer / tile geometry or run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Out-of-range tensor, brick or store coordinates.
class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Rejected user input (synthetic spec fields, CLI values).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class FormatErrorKind { BadMagic, VersionMismatch, Truncated, Inconsistent };

// Malformed layer files or encoded byte streams.
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace cnv
