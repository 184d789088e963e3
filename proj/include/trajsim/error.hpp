#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trajsim {

// Every failure surfaced by the library carries one of these codes so that
// the service and CLI layers can map it onto status codes and exit codes.
enum class ErrorCode {
    EmptyCode,
    ParseError,
    UnknownBackend,
    UnknownSession,
    BackendFailure,
    NonMonotonicTime,
    MalformedOutcome,
    OutOfRange,
    ConcurrentStep,
    UnknownAnalyte,
    UnsupportedActionKind,
    UnknownPlaceholder,
    NoStructuredBlock,
    CountMismatch,
    TypeMismatch,
    Transport,
    Auth,
    ExhaustedRetries,
    PositionNotFound,
    MalformedRow,
    EmptyCorpus,
    ConfigError,
    SchemaViolation,
    EmptyInput,
    NoRangedPairs,
    AlignmentError,
    InvalidArgument,
    Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace trajsim
