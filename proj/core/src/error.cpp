#include "edffd/error.hpp"

namespace edffd {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::TooCoarse: return "TooCoarse";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::DegenerateCorners: return "DegenerateCorners";
    case ErrorCode::AtInfinity: return "AtInfinity";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::ZeroLengthEdge: return "ZeroLengthEdge";
    case ErrorCode::NotDivisible: return "NotDivisible";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::InsufficientOverlap: return "InsufficientOverlap";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Schema: return "Schema";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace edffd
