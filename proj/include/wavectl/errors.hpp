#pragma once

#include <stdexcept>
#include <string>

namespace wavectl {

/// Grid or array shapes that do not fit an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A parameter outside its documented range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid run configuration (bad keys, CFL violation, mismatched hashes).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulation produced NaN or Inf values.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(const std::string& field, const std::string& where)
      : std::runtime_error("non-finite values in field '" + field + "' (" + where + ")"),
        field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Failure reading or writing datasets, checkpoints or CSV output.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wavectl
