#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mtocs {

/// Closed set of failure kinds raised by every module. The API layer maps
/// each one onto exactly one machine code and HTTP status.
enum class ErrorCode {
  Validation,
  MalformedRequest,
  Unauthenticated,
  Unauthorized,
  UnknownParticipant,
  UnknownVisit,
  UnknownEntity,
  NotFound,
  IllegalTransition,
  IllegalState,
  Conflict,
  NoActiveDispatch,
  IdExhausted,
  VisitSequenceExhausted,
  UnsupportedLocale,
  SchemaError,
  MissingTemplate,
  KeyPolicyViolation,
  BackendUnavailable,
  FormatError,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::optional<std::string> field = std::nullopt)
      : std::runtime_error(std::move(message)), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  /// Locator of the offending input (JSON field, CSV cell, question id), if any.
  const std::optional<std::string>& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::optional<std::string> field_;
};

/// Stable snake_case token for an error code ("illegal_state").
std::string_view to_string(ErrorCode code) noexcept;

[[noreturn]] inline void fail(ErrorCode code, std::string message,
                              std::optional<std::string> field = std::nullopt) {
  throw Error(code, std::move(message), std::move(field));
}

}  // namespace mtocs
