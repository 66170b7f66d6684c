#pragma once

#include <stdexcept>
#include <string>

namespace mbtl {

// Bad input data or arguments use std::invalid_argument; misuse of an object
// (e.g. a second backward pass) uses std::logic_error. The three classes
// below map onto distinct CLI exit codes.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mbtl
