#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace siprop {

enum class ErrorCode {
  // data / validation
  InvalidAssignment,
  PositivityViolation,
  DimensionMismatch,
  MissingPropensity,
  InvalidContrast,
  InvalidArgument,
  SchemaError,
  // selection
  NoConvergence,
  RankDeficient,
  DegenerateSelection,
  NoSelection,
  // truncated normal
  ZeroMass,
  BracketFailure,
  InvalidRegion,
  // geometry
  IndexNotInModel,
  DegenerateDirection,
  UnionCapExceeded,
  // nuisance estimation
  Separation,
  ArmRankDeficient,
  NoEligibleDonor,
  EmptyNeighborhood,
  AllNeighborhoodsEmpty,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Broad category used by front ends to pick an exit status.
enum class ErrorClass { Data, Numerical, Usage };

ErrorClass classify(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace siprop
