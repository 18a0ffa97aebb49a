#pragma once

#include <stdexcept>
#include <string>

namespace trident {

/// Base for all errors raised by the pipeline. The CLI maps subclasses to
/// exit codes: ConfigError -> 1, DataError -> 2, ProviderError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed JSON text; offset is the byte position reported by the parser.
class JsonParseError : public DataError {
 public:
  JsonParseError(const std::string& message, std::size_t byte_offset)
      : DataError(message), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

}  // namespace trident
