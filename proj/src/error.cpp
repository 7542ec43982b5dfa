// SPDX-License-Identifier: Apache-2.0

#include "pqbench/error.hpp"

namespace pqbench {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedRegistry: return "MALFORMED_REGISTRY";
        case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
        case ErrorCode::InvalidRecord: return "INVALID_RECORD";
        case ErrorCode::WrongFamily: return "WRONG_FAMILY";
        case ErrorCode::SpawnFailed: return "SPAWN_FAILED";
        case ErrorCode::NonzeroExit: return "NONZERO_EXIT";
        case ErrorCode::OpPanic: return "OP_PANIC";
        case ErrorCode::MissingProvider: return "MISSING_PROVIDER";
        case ErrorCode::MalformedMassif: return "MALFORMED_MASSIF";
        case ErrorCode::EmptyProfile: return "EMPTY_PROFILE";
        case ErrorCode::IoError: return "IO_ERROR";
        case ErrorCode::MalformedControl: return "MALFORMED_CONTROL";
        case ErrorCode::VersionMismatch: return "VERSION_MISMATCH";
        case ErrorCode::ControlTimeout: return "CONTROL_TIMEOUT";
        case ErrorCode::TooManyRetries: return "TOO_MANY_RETRIES";
        case ErrorCode::ConnectRefused: return "CONNECT_REFUSED";
        case ErrorCode::PlanMismatch: return "PLAN_MISMATCH";
        case ErrorCode::HandshakeMismatch: return "HANDSHAKE_MISMATCH";
        case ErrorCode::StreamClosed: return "STREAM_CLOSED";
        case ErrorCode::MalformedSTime: return "MALFORMED_S_TIME";
        case ErrorCode::InconsistentGroup: return "INCONSISTENT_GROUP";
        case ErrorCode::IncompleteTriple: return "INCOMPLETE_TRIPLE";
        case ErrorCode::UnknownExcludeId: return "UNKNOWN_EXCLUDE_ID";
        case ErrorCode::MalformedCsv: return "MALFORMED_CSV";
        case ErrorCode::MalformedSpeedOutput: return "MALFORMED_SPEED_OUTPUT";
        case ErrorCode::Usage: return "USAGE";
    }
    return "UNKNOWN";
}

std::optional<ErrorCode> parse_error_code(std::string_view name) noexcept {
    for (int i = 0; i <= static_cast<int>(ErrorCode::Usage); ++i) {
        const auto code = static_cast<ErrorCode>(i);
        if (to_string(code) == name) return code;
    }
    return std::nullopt;
}

}  // namespace pqbench
