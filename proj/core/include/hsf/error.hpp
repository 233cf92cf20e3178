// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace hsf {

/// Broad failure class. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Usage,    // caller supplied an out-of-range or inconsistent argument
  Data,     // malformed input, I/O failure, dimension or label problems
  Numeric,  // a computation produced a non-finite value
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Bad argument value (k outside [1,8], beta outside (0,1), ...).
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// Malformed serialized data. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::optional<std::uint64_t> offset);

  std::optional<std::uint64_t> offset() const noexcept { return offset_; }

 private:
  std::optional<std::uint64_t> offset_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error(ErrorKind::Data, what) {}
};

/// Dataset or argument violates a domain invariant (duplicate ids, a class
/// missing where both are required, ...).
class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what)
      : Error(ErrorKind::Data, what) {}
};

/// A record has fewer tokens than the requested k.
class InsufficientTokensError : public Error {
 public:
  InsufficientTokensError(std::size_t token_count, int k,
                          std::string record_id = {});

  std::size_t token_count() const noexcept { return token_count_; }
  int k() const noexcept { return k_; }
  const std::string& record_id() const noexcept { return record_id_; }

 private:
  std::size_t token_count_;
  int k_;
  std::string record_id_;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::Numeric, what) {}
};

}  // namespace hsf
