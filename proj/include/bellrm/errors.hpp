#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bellrm {

// Invalid configuration: bad parameter values, unknown model kinds,
// unsupported model/operation combinations. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Problems with input data. CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StreamOrderError : public DataError {
 public:
  using DataError::DataError;
};

// Truncated or corrupt time-tag file; carries the offending byte offset.
class IntegrityError : public DataError {
 public:
  IntegrityError(const std::string& what, std::uint64_t offset)
      : DataError(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// A statistic is undefined on the given data (zero records, no events in
// the averaging window, empty sequence set).
class NoDataError : public DataError {
 public:
  using DataError::DataError;
};

class IncompleteSettingsError : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientLengthError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace bellrm
