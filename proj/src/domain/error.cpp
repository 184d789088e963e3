#include "trajsim/error.hpp"

namespace trajsim {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::EmptyCode: return "empty_code";
    case ErrorCode::ParseError: return "parse_error";
    case ErrorCode::UnknownBackend: return "unknown_backend";
    case ErrorCode::UnknownSession: return "unknown_session";
    case ErrorCode::BackendFailure: return "backend_failure";
    case ErrorCode::NonMonotonicTime: return "non_monotonic_time";
    case ErrorCode::MalformedOutcome: return "malformed_outcome";
    case ErrorCode::OutOfRange: return "out_of_range";
    case ErrorCode::ConcurrentStep: return "concurrent_step";
    case ErrorCode::UnknownAnalyte: return "unknown_analyte";
    case ErrorCode::UnsupportedActionKind: return "unsupported_action_kind";
    case ErrorCode::UnknownPlaceholder: return "unknown_placeholder";
    case ErrorCode::NoStructuredBlock: return "no_structured_block";
    case ErrorCode::CountMismatch: return "count_mismatch";
    case ErrorCode::TypeMismatch: return "type_mismatch";
    case ErrorCode::Transport: return "transport";
    case ErrorCode::Auth: return "auth";
    case ErrorCode::ExhaustedRetries: return "exhausted_retries";
    case ErrorCode::PositionNotFound: return "position_not_found";
    case ErrorCode::MalformedRow: return "malformed_row";
    case ErrorCode::EmptyCorpus: return "empty_corpus";
    case ErrorCode::ConfigError: return "config_error";
    case ErrorCode::SchemaViolation: return "schema_violation";
    case ErrorCode::EmptyInput: return "empty_input";
    case ErrorCode::NoRangedPairs: return "no_ranged_pairs";
    case ErrorCode::AlignmentError: return "alignment_error";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Io: return "io";
    }
    return "unknown";
}

} // namespace trajsim
