#pragma once

#include <stdexcept>
#include <string>

namespace ulcerseg {

// A value violates a type invariant (out-of-range probability, size mismatch).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input files are missing, unreadable or inconsistent with each other.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration file or command-line problems.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A predictor failed or produced an unusable map.
class PredictionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ulcerseg
