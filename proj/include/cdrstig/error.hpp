#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cdrstig {

enum class ErrorCode {
  // input data
  MalformedRow,
  BadTimestamp,
  BadPrefix,
  UnknownAntenna,
  UnknownDistrict,
  TimestampOutOfStudyYear,
  Io,
  Inconsistent,
  // geometry
  OutOfBounds,
  DegenerateGeometry,
  // stigmergy
  StepMismatch,
  GridMismatch,
  BothTrailsEmpty,
  // metrics
  NoCalls,
  OutOfRange,
  ZeroVector,
  NoLocals,
  NoNightTraffic,
  NoResidents,
  LastMonth,
  UnequalGroups,
  EmptyGroup,
  // statistics
  LengthMismatch,
  ZeroVariance,
  TooFewSamples,
  Empty,
  SingularDesign,
  NonInvertible,
  // configuration
  ConfigInvalid,
  EventTooCloseToYearEdge,
  // programming errors
  InvariantViolation,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Broad class of an error, used to pick a process exit status.
enum class ErrorCategory { Input, Config, Internal };

ErrorCategory category_of(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace cdrstig
