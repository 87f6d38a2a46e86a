#include "cdrstig/error.hpp"

namespace cdrstig {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::BadTimestamp: return "BadTimestamp";
    case ErrorCode::BadPrefix: return "BadPrefix";
    case ErrorCode::UnknownAntenna: return "UnknownAntenna";
    case ErrorCode::UnknownDistrict: return "UnknownDistrict";
    case ErrorCode::TimestampOutOfStudyYear: return "TimestampOutOfStudyYear";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Inconsistent: return "Inconsistent";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::StepMismatch: return "StepMismatch";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::BothTrailsEmpty: return "BothTrailsEmpty";
    case ErrorCode::NoCalls: return "NoCalls";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NoLocals: return "NoLocals";
    case ErrorCode::NoNightTraffic: return "NoNightTraffic";
    case ErrorCode::NoResidents: return "NoResidents";
    case ErrorCode::LastMonth: return "LastMonth";
    case ErrorCode::UnequalGroups: return "UnequalGroups";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::NonInvertible: return "NonInvertible";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::EventTooCloseToYearEdge: return "EventTooCloseToYearEdge";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::EventTooCloseToYearEdge:
      return ErrorCategory::Config;
    case ErrorCode::InvariantViolation:
      return ErrorCategory::Internal;
    default:
      return ErrorCategory::Input;
  }
}

}  // namespace cdrstig
