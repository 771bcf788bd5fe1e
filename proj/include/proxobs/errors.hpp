#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace proxobs {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  ZeroDirection,
  ZeroRow,
  NoConvergence,
  NonFiniteState,
  NonFiniteMeasurement,
  NonDiagonalV,
  SingularCovariance,
  SingularInput,
  UnboundedF,
  InvalidDecay,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroDirection: return "ZeroDirection";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::NonFiniteMeasurement: return "NonFiniteMeasurement";
    case ErrorCode::NonDiagonalV: return "NonDiagonalV";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::SingularInput: return "SingularInput";
    case ErrorCode::UnboundedF: return "UnboundedF";
    case ErrorCode::InvalidDecay: return "InvalidDecay";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace proxobs
