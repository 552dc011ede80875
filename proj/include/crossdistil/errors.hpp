#pragma once

#include <stdexcept>
#include <string>

namespace crossdistil {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or mismatched shapes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. backward on a non-scalar.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A label-combination subset required for sampling is empty.
class DegenerateLabels : public Error {
 public:
  explicit DegenerateLabels(std::string subset)
      : Error("degenerate labels: subset D^{" + subset + "} is empty"),
        subset_(std::move(subset)) {}

  const std::string& subset() const { return subset_; }

 private:
  std::string subset_;
};

/// Metric requested on inputs where it is undefined (e.g. a single class).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

}  // namespace crossdistil
