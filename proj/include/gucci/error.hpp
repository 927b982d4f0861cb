#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace gucci {

/// Dimension mismatch between parameters, inputs, or labels.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Accuracy barrier requested where the interpolated reference accuracy is zero.
class DegenerateAccuracyError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Training produced non-finite values.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration; path() is a JSON path such as "$.strategy.beta".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// IDX parse failure at a byte offset.
class IdxParseError : public std::runtime_error {
 public:
  enum class Kind { WrongMagic, Truncated, CountMismatch, Io };

  IdxParseError(Kind kind, std::size_t offset, const std::string& what)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
        kind_(kind),
        offset_(offset) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

}  // namespace gucci
