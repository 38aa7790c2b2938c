#include "whirlpool/errors.hpp"

namespace whirlpool {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::DegenerateGradient: return "DegenerateGradient";
    case ErrorCode::NoAscent: return "NoAscent";
    case ErrorCode::DtUnderflow: return "DtUnderflow";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::CollapsedGap: return "CollapsedGap";
    case ErrorCode::LineSearchFailure: return "LineSearchFailure";
    case ErrorCode::NonMonotone: return "NonMonotone";
    case ErrorCode::UnboundedRegime: return "UnboundedRegime";
    case ErrorCode::PositiveDefinitenessViolated: return "PositiveDefinitenessViolated";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace whirlpool
