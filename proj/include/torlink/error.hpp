#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace torlink {

enum class ErrorCode {
  NonFinite,
  ZeroDenominator,
  DegenerateFrame,
  LeftDomain,
  StepUnderflow,
  NoCrossing,
  NotTransverse,
  UnwrapFailure,
  NonIntegral,
  AtPole,
  DegenerateTriangle,
  ZeroOnSphere,
  ZeroOnTorus,
  LoopMeetsCol,
  NotFixed,
  FixedPoint,
  SegmentMeetsCol,
  PreconditionFailed,
  ParseError,
  ValidationError,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Base error for every failure raised by the toolkit.  `value()` carries the
/// one number a caller usually wants (exit time for LeftDomain, horizon for
/// NoCrossing, residual for NonIntegral); it is NaN otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, double value = std::numeric_limits<double>::quiet_NaN());

  ErrorCode code() const noexcept { return code_; }
  double value() const noexcept { return value_; }

 private:
  ErrorCode code_;
  double value_;
};

class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& message);

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations);

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

}  // namespace torlink
