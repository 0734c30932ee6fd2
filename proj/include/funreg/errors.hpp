#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace funreg {

// Two functions live on different grids.
class GridMismatchError : public std::runtime_error {
 public:
  explicit GridMismatchError(const std::string& what) : std::runtime_error(what) {}
};

// Operation requires a self-adjoint (or PSD) operator and got something else.
class UnsupportedOperatorError : public std::runtime_error {
 public:
  explicit UnsupportedOperatorError(const std::string& what) : std::runtime_error(what) {}
};

// A step size violates the admissibility precondition gamma_j * (C + lambda) <= 1.
class StepSizeTooLargeError : public std::runtime_error {
 public:
  StepSizeTooLargeError(const std::string& what, std::int64_t offending_index)
      : std::runtime_error(what), offending_index_(offending_index) {}
  std::int64_t offending_index() const { return offending_index_; }

 private:
  std::int64_t offending_index_;
};

// Source-condition construction dropped too much energy through the pseudo-inverse.
class IllPosedSourceError : public std::runtime_error {
 public:
  explicit IllPosedSourceError(const std::string& what) : std::runtime_error(what) {}
};

// (nu, mu) outside every printed branch of the series bound.
class UnsupportedBranchError : public std::runtime_error {
 public:
  explicit UnsupportedBranchError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite sample values encountered mid-stream.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::int64_t step_index)
      : std::runtime_error(what), step_index_(step_index) {}
  std::int64_t step_index() const { return step_index_; }

 private:
  std::int64_t step_index_;
};

// Malformed input file.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::int64_t line)
      : std::runtime_error(what), line_(line) {}
  std::int64_t line() const { return line_; }

 private:
  std::int64_t line_;
};

}  // namespace funreg
