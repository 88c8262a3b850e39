#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace inrgan {

// Shape mismatches and violated preconditions are reported with
// std::invalid_argument. The types below cover the remaining failure kinds.

class UnsupportedRankError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericalStabilityError : public std::runtime_error {
 public:
  NumericalStabilityError(const std::string& what, double offending_value)
      : std::runtime_error(what), offending_value_(offending_value) {}
  double offending_value() const noexcept { return offending_value_; }

 private:
  double offending_value_;
};

/// Raised when a loss becomes NaN/inf. Carries the last diagnostic record.
class NanAbortError : public std::runtime_error {
 public:
  NanAbortError(const std::string& what, std::string record)
      : std::runtime_error(what), record_(std::move(record)) {}
  const std::string& record() const noexcept { return record_; }

 private:
  std::string record_;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::string path)
      : std::runtime_error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class IngestionError : public std::runtime_error {
 public:
  IngestionError(const std::string& what, std::vector<std::string> offenders)
      : std::runtime_error(what), offenders_(std::move(offenders)) {}
  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  std::vector<std::string> offenders_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace inrgan
