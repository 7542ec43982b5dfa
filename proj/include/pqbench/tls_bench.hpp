// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "pqbench/compute_bench.hpp"
#include "pqbench/control.hpp"
#include "pqbench/handshake.hpp"
#include "pqbench/model.hpp"

namespace pqbench {

// ---------------------------------------------------------------------------
// Handshake throughput over TCP

struct HandshakeServerOptions {
    std::string bind_host = "0.0.0.0";
    /// Called once both listeners are bound, with their actual ports.
    std::function<void(std::uint16_t control_port, std::uint16_t data_port)> on_listening;
    EventLog* log = nullptr;
};

/// Serves one client session: control on config.control_port, simulated
/// handshakes on config.data_port between GO and RESULT. Credentials come
/// from `manifest`; each test starts with an empty session cache.
/// Throws VERSION_MISMATCH, CONTROL_TIMEOUT, PLAN_MISMATCH, IO_ERROR.
ServerSessionLog run_handshake_server(const BenchConfig& config, const ProviderSet& providers,
                                      const CredentialManifest& manifest, const TestPlan& plan,
                                      const HandshakeServerOptions& options = {});

/// Sequential simulated handshakes against `host:data_port` for one window.
/// A SESSION_REUSE window first runs one uncounted full handshake to obtain
/// the session token. Any failed handshake fails the window.
class SimulatedHandshakeWindow final : public ClientWindow {
public:
    SimulatedHandshakeWindow(const ProviderSet& providers, std::string host, std::uint16_t data_port,
                             double timeout_seconds);
    WindowOutcome run(const PlanEntry& entry, double window_seconds) override;

private:
    const ProviderSet& providers_;
    std::string host_;
    std::uint16_t data_port_;
    double timeout_seconds_;
};

/// Runs an external s_time-style command per window and parses its summary.
/// Placeholders: `{alg}` = `<sig>:<kem>`, `{op}` = mode, `{window}` seconds.
class STimeAdapterWindow final : public ClientWindow {
public:
    explicit STimeAdapterWindow(std::string command_template) : template_(std::move(command_template)) {}
    WindowOutcome run(const PlanEntry& entry, double window_seconds) override;

private:
    std::string template_;
};

struct HandshakeClientOptions {
    EventLog* log = nullptr;
    /// When non-empty, `run_<k>.csv` files here are rewritten as records arrive.
    std::filesystem::path output_dir;
    /// Replaces the simulated handshake window (external adapter mode).
    ClientWindow* window = nullptr;
};

/// Connects to config.peer_address (the server's control port), retrying up
/// to config.max_retries times, then drives the plan. Throws CONNECT_REFUSED,
/// CONTROL_TIMEOUT, VERSION_MISMATCH, PLAN_MISMATCH.
ClientSessionResult run_handshake_client(const BenchConfig& config, const ProviderSet& providers,
                                         const TestPlan& plan, const HandshakeClientOptions& options = {});

// ---------------------------------------------------------------------------
// Speed

struct SpeedBenchOptions {
    int first_run_index = 1;
    /// When non-empty, `run_<k>.csv` is rewritten here after each algorithm.
    std::filesystem::path output_dir;
};

/// Fixed-window throughput of every SPEED algorithm's three operations,
/// run-major, window = config.tls_window_seconds. Throws MISSING_PROVIDER
/// and OP_PANIC.
std::vector<SpeedRecord> bench_tls_speed(const Registry& registry, const ProviderSet& providers,
                                         const BenchConfig& config, CycleCounter& counter, WallClock& clock,
                                         const SpeedBenchOptions& options = {});

// ---------------------------------------------------------------------------
// s_time output

struct STimeSummary {
    std::int64_t connections = 0;
    double user_connections_per_sec = 0.0;
    double real_seconds = 0.0;

    friend bool operator==(const STimeSummary&, const STimeSummary&) = default;
};

/// Reads the two summary lines of one s_time timing pass:
///   `N connections in T s; C connections/user sec, bytes read B`
///   `N connections in R real seconds, B bytes read per connection`
/// Other lines are ignored. Throws MALFORMED_S_TIME when either line is
/// missing, repeated or malformed, or the two counts differ.
STimeSummary parse_s_time(std::string_view text);

}  // namespace pqbench
