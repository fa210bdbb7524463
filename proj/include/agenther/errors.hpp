#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agenther {

// Bad input data: malformed corpus lines, invariant violations, bad files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A corpus line that failed to parse. Carries the 1-based line number and
// the byte offset of the start of that line.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t byte_offset)
      : DataError(what), line_(line), byte_offset_(byte_offset) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t line_;
  std::size_t byte_offset_;
};

class DuplicateIdError : public DataError {
 public:
  DuplicateIdError(const std::string& id, std::size_t first_line, std::size_t second_line)
      : DataError("duplicate id '" + id + "' at lines " + std::to_string(first_line) +
                  " and " + std::to_string(second_line)),
        id_(id),
        first_line_(first_line),
        second_line_(second_line) {}

  const std::string& id() const noexcept { return id_; }
  std::size_t first_line() const noexcept { return first_line_; }
  std::size_t second_line() const noexcept { return second_line_; }

 private:
  std::string id_;
  std::size_t first_line_;
  std::size_t second_line_;
};

// Invalid configuration values (thresholds out of range and the like).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Anything that went wrong talking to a judge backend.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

class AuthError : public BackendError {
 public:
  using BackendError::BackendError;
};

class TranscriptMissError : public BackendError {
 public:
  using BackendError::BackendError;
};

// The judge answered, but the answer does not fit the expected schema.
class SchemaError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace agenther
