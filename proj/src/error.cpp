#include "torlink/error.hpp"

#include <limits>

namespace torlink {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::DegenerateFrame: return "DegenerateFrame";
    case ErrorCode::LeftDomain: return "LeftDomain";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::NoCrossing: return "NoCrossing";
    case ErrorCode::NotTransverse: return "NotTransverse";
    case ErrorCode::UnwrapFailure: return "UnwrapFailure";
    case ErrorCode::NonIntegral: return "NonIntegral";
    case ErrorCode::AtPole: return "AtPole";
    case ErrorCode::DegenerateTriangle: return "DegenerateTriangle";
    case ErrorCode::ZeroOnSphere: return "ZeroOnSphere";
    case ErrorCode::ZeroOnTorus: return "ZeroOnTorus";
    case ErrorCode::LoopMeetsCol: return "LoopMeetsCol";
    case ErrorCode::NotFixed: return "NotFixed";
    case ErrorCode::FixedPoint: return "FixedPoint";
    case ErrorCode::SegmentMeetsCol: return "SegmentMeetsCol";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::string join_violations(const std::vector<std::string>& violations) {
  std::string out = "invalid configuration";
  for (const auto& v : violations) {
    out += "\n  - ";
    out += v;
  }
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, double value)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), value_(value) {}

ParseError::ParseError(int line, int column, const std::string& message)
    : Error(ErrorCode::ParseError,
            "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error(ErrorCode::ValidationError, join_violations(violations)), violations_(std::move(violations)) {}

}  // namespace torlink
