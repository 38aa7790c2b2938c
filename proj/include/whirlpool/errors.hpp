#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace whirlpool {

enum class ErrorCode {
  InvalidArgument,
  ZeroMass,
  OutOfDomain,
  DegenerateGradient,
  NoAscent,
  DtUnderflow,
  NonFinite,
  SizeMismatch,
  CollapsedGap,
  LineSearchFailure,
  NonMonotone,
  UnboundedRegime,
  PositiveDefinitenessViolated,
  ParseError,
  ValidationError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; the code tells callers which
/// failure mode occurred (the CLI maps codes onto exit statuses).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace whirlpool
