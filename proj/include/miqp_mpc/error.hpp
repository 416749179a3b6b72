#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace miqp_mpc {

enum class ErrorCode {
  DimensionMismatch,
  NonPsdHessian,
  InvalidArgument,
  NoUnpinnedBinary,
  InfeasibleBoxes,
  HorizonTooShort,
  OddStepCount,
  LayoutMismatch,
  MissingPreviousObjective,
  ControllerInfeasible,
  LengthMismatch,
  EmptyWindow,
  ParseError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPsdHessian: return "NonPsdHessian";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoUnpinnedBinary: return "NoUnpinnedBinary";
    case ErrorCode::InfeasibleBoxes: return "InfeasibleBoxes";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::OddStepCount: return "OddStepCount";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::MissingPreviousObjective: return "MissingPreviousObjective";
    case ErrorCode::ControllerInfeasible: return "ControllerInfeasible";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace miqp_mpc
