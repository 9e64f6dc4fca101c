#include "mtocs/error.hpp"

namespace mtocs {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Validation: return "validation_failed";
    case ErrorCode::MalformedRequest: return "malformed_request";
    case ErrorCode::Unauthenticated: return "unauthenticated";
    case ErrorCode::Unauthorized: return "forbidden";
    case ErrorCode::UnknownParticipant: return "unknown_participant";
    case ErrorCode::UnknownVisit: return "unknown_visit";
    case ErrorCode::UnknownEntity: return "unknown_entity";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::IllegalTransition: return "illegal_transition";
    case ErrorCode::IllegalState: return "illegal_state";
    case ErrorCode::Conflict: return "conflict";
    case ErrorCode::NoActiveDispatch: return "no_active_dispatch";
    case ErrorCode::IdExhausted: return "id_exhausted";
    case ErrorCode::VisitSequenceExhausted: return "visit_sequence_exhausted";
    case ErrorCode::UnsupportedLocale: return "unsupported_locale";
    case ErrorCode::SchemaError: return "schema_error";
    case ErrorCode::MissingTemplate: return "missing_template";
    case ErrorCode::KeyPolicyViolation: return "key_policy_violation";
    case ErrorCode::BackendUnavailable: return "backend_unavailable";
    case ErrorCode::FormatError: return "format_error";
    case ErrorCode::Internal: return "internal";
  }
  return "internal";
}

}  // namespace mtocs
