#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lsnet {

enum class ErrorCode {
  EmptyInput,
  SpatialMismatch,
  ShapeMismatch,
  ChannelMismatch,
  InvalidConfig,
  HistoryLengthMismatch,
  NonMonotonicIndex,
  DegenerateTrajectory,
  SingularFit,
  ParseError,
  MissingField,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace lsnet
