#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace edffd {

enum class ErrorCode {
  TooCoarse,
  EmptyMask,
  DimensionMismatch,
  NonPositiveScale,
  DegenerateCorners,
  AtInfinity,
  Singular,
  SingularSystem,
  TooSmall,
  ZeroLengthEdge,
  NotDivisible,
  WidthMismatch,
  Divergence,
  InsufficientOverlap,
  InvalidArgument,
  Io,
  Schema,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable code; every failing operation in the
/// library throws this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace edffd
