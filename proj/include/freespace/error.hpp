#pragma once

#include <stdexcept>
#include <string>

namespace freespace {

// Base for all pipeline errors; `what()` carries the full diagnostic.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input file or wire-format violations (bit depth, channels, magic, ...).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Invalid measurement or contract violation on numeric inputs.
class InvalidMeasurement : public Error {
 public:
  explicit InvalidMeasurement(const std::string& msg) : Error(msg) {}
};

// Least-squares / RANSAC failures (underdetermined, rank-deficient, no
// solvable subset).
class FitError : public Error {
 public:
  explicit FitError(const std::string& msg) : Error(msg) {}
};

// Transform estimation failures (too few points, collinear geometry).
class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& msg) : Error(msg) {}
};

// Configuration file problems; message names the offending key.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace freespace
