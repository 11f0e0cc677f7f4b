#include "siprop/error.hpp"

namespace siprop {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidAssignment: return "InvalidAssignment";
    case ErrorCode::PositivityViolation: return "PositivityViolation";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingPropensity: return "MissingPropensity";
    case ErrorCode::InvalidContrast: return "InvalidContrast";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DegenerateSelection: return "DegenerateSelection";
    case ErrorCode::NoSelection: return "NoSelection";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::InvalidRegion: return "InvalidRegion";
    case ErrorCode::IndexNotInModel: return "IndexNotInModel";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::UnionCapExceeded: return "UnionCapExceeded";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::ArmRankDeficient: return "ArmRankDeficient";
    case ErrorCode::NoEligibleDonor: return "NoEligibleDonor";
    case ErrorCode::EmptyNeighborhood: return "EmptyNeighborhood";
    case ErrorCode::AllNeighborhoodsEmpty: return "AllNeighborhoodsEmpty";
  }
  return "Unknown";
}

ErrorClass classify(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument:
      return ErrorClass::Usage;
    case ErrorCode::NoConvergence:
    case ErrorCode::RankDeficient:
    case ErrorCode::DegenerateSelection:
    case ErrorCode::ZeroMass:
    case ErrorCode::BracketFailure:
    case ErrorCode::InvalidRegion:
    case ErrorCode::DegenerateDirection:
    case ErrorCode::UnionCapExceeded:
    case ErrorCode::IndexNotInModel:
      return ErrorClass::Numerical;
    default:
      return ErrorClass::Data;
  }
}

}  // namespace siprop
