#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mug {

// Base class for all library errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes are incompatible.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// API misuse (violated precondition).
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN / Inf produced, or a gradient check failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Schema-level inconsistency (meta-path orientation, unknown types, ...).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Invalid synthetic-graph or run configuration.
class SpecError : public Error {
 public:
  SpecError(const std::string& msg, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Bundle loading failure, located by file and line.
class BundleError : public Error {
 public:
  enum class Kind { MissingFile, MalformedRow, UnknownType, UnknownNode, UnknownRelation, OutOfRange, Duplicate, Coverage, Schema };

  BundleError(Kind kind, std::string file, std::size_t line, const std::string& msg)
      : Error(file + ":" + std::to_string(line) + ": " + msg), kind_(kind), file_(std::move(file)), line_(line) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  Kind kind_;
  std::string file_;
  std::size_t line_;
};

}  // namespace mug
