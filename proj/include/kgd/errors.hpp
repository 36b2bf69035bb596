#pragma once

#include <stdexcept>
#include <string>

namespace kgd {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// exit codes: ConfigError -> 2 (usage), DataError -> 3 (data validation),
// everything else -> 1 (runtime failure).

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kgd
