// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pqbench/model.hpp"

namespace pqbench {

enum class Command { GenKeys, ComputeBench, TlsBench, Parse, Report, FullRun };

std::string_view to_string(Command command) noexcept;  // "gen-keys", ...

/// Input formats of the `parse` command.
enum class ParseKind { LiboqsSpeed, OpensslSpeed, STime, Massif };

/// Fully resolved invocation: defaults, then PQBENCH_OUTPUT_ROOT, then the
/// config file, then flags.
struct CliOptions {
    Command command = Command::FullRun;
    BenchConfig config;

    bool mock = false;
    std::uint64_t seed = 42;
    double mock_work_scale = 1.0;
    std::filesystem::path registry_path;  // empty: builtin registry
    std::vector<std::string> enable_ids;

    std::string adapter;        // liboqs speed (compute) or s_time (tls client)
    std::string speed_adapter;  // openssl speed
    std::string profiler;       // writes a Massif profile to {out} or stdout
    std::filesystem::path massif_dir;
    std::filesystem::path credentials_dir;  // empty: <machine>/tls/keys

    std::vector<std::string> sig_ids;  // handshake plan selection, empty = all
    std::vector<std::string> kem_ids;

    int top_n = 10;
    bool prefer_standardised = false;
    std::vector<std::string> exclude_ids;
    std::filesystem::path input_dir;  // report input, empty: the machine directory

    std::optional<ParseKind> parse_kind;
    std::string parse_algorithm;
    std::optional<Operation> parse_operation;
    std::optional<HandshakeMode> parse_mode;
    std::optional<int> parse_run;
    std::vector<std::filesystem::path> parse_files;

    bool interactive = false;

    std::filesystem::path credentials() const {
        return credentials_dir.empty() ? config.machine_dir() / "tls" / "keys" : credentials_dir;
    }
};

using EnvLookup = std::function<std::optional<std::string>(std::string_view name)>;

/// Reads the process environment.
std::optional<std::string> process_env(std::string_view name);

/// Parses `args` (without the program name). Returns nullopt after printing
/// help to `out`. Throws USAGE for bad flags and INVALID_CONFIG for a bad
/// config file or merged value.
std::optional<CliOptions> parse_cli(const std::vector<std::string>& args, const EnvLookup& env, std::ostream& out);

/// 1 for user errors (flags, config, registry file), 2 for runtime failures.
int exit_code_for(ErrorCode code) noexcept;

/// Whole program. The last line written to `err` is always
/// `status=<ok|error> code=<OK|ERROR_CODE>`.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env);

}  // namespace pqbench
