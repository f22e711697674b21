#pragma once

#include <stdexcept>
#include <string>

namespace idfact {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An input violates a hypothesis of the factorization theorems
/// (operator norm above one, vanishing column, rank too large).
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// Counting preconditions of a column selection fail, or the greedy
/// scan ran out of admissible indices.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Certified extension of a column family stopped short of the node resolution.
class StallError : public Error {
 public:
  StallError(const std::string& what, double where) : Error(what), where_(where) {}
  double where() const noexcept { return where_; }

 private:
  double where_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Near-identity inversion requested with ||S - I|| >= 1 (or above the budget).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), message_(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::size_t line_;
};

}  // namespace idfact
