#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcjack {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: shapes, domains, files. CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : ValidationError("line " + std::to_string(line) +
                        (column ? ", column " + std::to_string(column) : std::string()) + ": " +
                        what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  // 1-based; 0 when the error is not tied to a cell.
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Numerical failure on otherwise well-formed input. CLI exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

class SingularDesign : public NumericError {
 public:
  using NumericError::NumericError;
};

class InsufficientData : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateFit : public NumericError {
 public:
  using NumericError::NumericError;
};

class NoViableModel : public NumericError {
 public:
  using NumericError::NumericError;
};

class JackknifeRankError : public NumericError {
 public:
  JackknifeRankError(std::size_t area, const std::string& what)
      : NumericError("leave-one-out design without area index " + std::to_string(area) +
                     " is rank deficient: " + what),
        area_(area) {}

  std::size_t area() const noexcept { return area_; }

 private:
  std::size_t area_;
};

}  // namespace mcjack
