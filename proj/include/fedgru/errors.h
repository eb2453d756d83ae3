#pragma once

#include <stdexcept>
#include <string>

namespace fedgru {

// Invalid configuration value or unknown key. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable input, unusable data, I/O failure.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape, length or layout mismatch between arguments.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A rate whose denominator is zero.
class MetricUndefined : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace fedgru
