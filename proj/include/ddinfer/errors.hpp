#pragma once

#include <stdexcept>
#include <string>

namespace ddinfer {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (vector lengths, matrix sizes, metric vs. space).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The inputs are well-formed but violate a mathematical precondition:
/// non-positive weights, rank deficiency, unequilibrable loads, and so on.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Every thermalized weight underflowed to zero. Usually the quench is too
/// fast for the resolution of the data.
class DegenerateError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Malformed input file (dataset, truss description, configuration).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line = -1)
      : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  [[nodiscard]] long line() const { return line_; }

 private:
  long line_;
};

namespace detail {

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace detail

}  // namespace ddinfer
