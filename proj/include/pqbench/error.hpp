// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pqbench {

enum class ErrorCode {
    MalformedRegistry,
    InvalidConfig,
    InvalidRecord,
    WrongFamily,
    SpawnFailed,
    NonzeroExit,
    OpPanic,
    MissingProvider,
    MalformedMassif,
    EmptyProfile,
    IoError,
    MalformedControl,
    VersionMismatch,
    ControlTimeout,
    TooManyRetries,
    ConnectRefused,
    PlanMismatch,
    HandshakeMismatch,
    StreamClosed,
    MalformedSTime,
    InconsistentGroup,
    IncompleteTriple,
    UnknownExcludeId,
    MalformedCsv,
    MalformedSpeedOutput,
    Usage,
};

/// Stable upper-case name, e.g. "MALFORMED_MASSIF". Used in logs, the control
/// protocol's ERR verb and the CLI status line.
std::string_view to_string(ErrorCode code) noexcept;
std::optional<ErrorCode> parse_error_code(std::string_view name) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

/// Failure of an external process. Carries the captured stderr and, for
/// NONZERO_EXIT, the exit status (128 + signal number for signalled children).
class ProcessError : public Error {
public:
    ProcessError(ErrorCode code, const std::string& message, int exit_status, std::string stderr_text)
        : Error(code, message), exit_status_(exit_status), stderr_text_(std::move(stderr_text)) {}

    int exit_status() const noexcept { return exit_status_; }
    const std::string& stderr_text() const noexcept { return stderr_text_; }

private:
    int exit_status_;
    std::string stderr_text_;
};

}  // namespace pqbench
