// SPDX-License-Identifier: Apache-2.0

// Line protocol that keeps a handshake client and server in lock-step.
//
//   client                         server
//   HELLO 1 <machine>      ->
//                          <-      HELLO 1 <machine>
//                          <-      READY HANDSHAKE <test> <seq> <attempt>
//   GO <test>              ->
//   ... data window ...
//   RESULT <test> <payload> ->
//                          <-      RESULT <test> <ack>
//                          <-      READY ... (next test) | DONE HANDSHAKE
//   DONE HANDSHAKE         ->
//
// A server that misses GO or RESULT within its deadline sends RETRY and a
// fresh READY for the same test; after max_retries retries it sends
// ERR TOO_MANY_RETRIES and moves on. `seq` is the 1-based plan position, so
// the client can tell a retry from the same test id in the next run.

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pqbench/model.hpp"

namespace pqbench {

inline constexpr int kControlProtocolVersion = 1;
inline constexpr std::size_t kMaxControlLineBytes = 4096;

enum class Suite { Handshake, Speed };

std::string_view to_string(Suite suite) noexcept;

/// One handshake test: `<sig>|<kem>|<mode>`.
struct TestId {
    std::string sig_id;
    std::string kem_id;
    HandshakeMode mode = HandshakeMode::FirstUse;

    std::string str() const;
    /// Throws MALFORMED_CONTROL.
    static TestId parse(std::string_view text);

    friend bool operator==(const TestId&, const TestId&) = default;
};

namespace control {

struct Hello {
    int version = kControlProtocolVersion;
    std::string machine_id;
    friend bool operator==(const Hello&, const Hello&) = default;
};
struct Ready {
    Suite suite = Suite::Handshake;
    std::string test_id;
    int seq = 1;
    int attempt = 1;
    friend bool operator==(const Ready&, const Ready&) = default;
};
struct Go {
    std::string test_id;
    friend bool operator==(const Go&, const Go&) = default;
};
struct Result {
    std::string test_id;
    std::string payload;  // rest of the line, may contain spaces
    friend bool operator==(const Result&, const Result&) = default;
};
struct Retry {
    std::string test_id;
    int attempt = 1;
    friend bool operator==(const Retry&, const Retry&) = default;
};
struct Done {
    Suite suite = Suite::Handshake;
    friend bool operator==(const Done&, const Done&) = default;
};
struct Err {
    std::string code;
    std::string detail;  // rest of the line, may be empty
    friend bool operator==(const Err&, const Err&) = default;
};

}  // namespace control

using ControlMessage = std::variant<control::Hello, control::Ready, control::Go, control::Result, control::Retry,
                                    control::Done, control::Err>;

/// One line without the terminating newline.
std::string encode_control(const ControlMessage& msg);
/// Throws MALFORMED_CONTROL (unknown verb, wrong field count, bad number,
/// over-long line).
ControlMessage decode_control(std::string_view line);

// ---------------------------------------------------------------------------
// Test plan

struct PlanEntry {
    TestId test;
    int run_index = 1;
};

/// Every (sig, kem) pair in both modes, repeated for each run. Both peers
/// derive the same plan from the same inputs; the client checks each READY
/// against it.
struct TestPlan {
    std::vector<TestId> tests;  // one run
    double window_seconds = 30.0;
    int num_runs = 1;
    int first_run_index = 1;

    /// Runs are outermost: all tests of run 1, then run 2, ...
    std::vector<PlanEntry> entries() const;
};

/// Pairs every selected HANDSHAKE signature with every selected HANDSHAKE
/// KEM, FIRST_USE before SESSION_REUSE. Empty selections mean "all".
/// Throws INVALID_CONFIG for unknown ids or ids without HANDSHAKE.
TestPlan make_test_plan(const Registry& registry, const std::vector<std::string>& sig_ids,
                        const std::vector<std::string>& kem_ids, double window_seconds, int num_runs,
                        int first_run_index = 1);

// ---------------------------------------------------------------------------
// Transport

/// Bidirectional line channel. `receive` returns nullopt on timeout and
/// throws STREAM_CLOSED once the peer has closed and the queue is drained.
class ControlChannel {
public:
    virtual ~ControlChannel() = default;
    virtual void send(const ControlMessage& msg) = 0;
    virtual std::optional<ControlMessage> receive(std::chrono::milliseconds timeout) = 0;
    virtual void close() = 0;
};

enum class Direction { ClientToServer, ServerToClient };

/// Decides, per message, whether the in-memory transport loses it.
using DropPolicy = std::function<bool(Direction, const ControlMessage&)>;

struct MemoryChannelPair {
    std::unique_ptr<ControlChannel> client;
    std::unique_ptr<ControlChannel> server;
};

/// Connected in-memory channels. Messages are encoded and decoded on the
/// way through, so the wire format is exercised too.
MemoryChannelPair make_memory_channel_pair(DropPolicy drop = {});

// ---------------------------------------------------------------------------
// Event log

enum class EventKind { ServerReady, ServerWindowOpen, ServerWindowClose, ClientWindowStart, ClientWindowEnd };

struct SessionEvent {
    EventKind kind;
    int seq;
    int attempt;
};

/// Append-only, shared by both peers; append order is the happens-before
/// order of the logged actions.
class EventLog {
public:
    void append(EventKind kind, int seq, int attempt);
    std::vector<SessionEvent> events() const;

private:
    mutable std::mutex mutex_;
    std::vector<SessionEvent> events_;
};

/// True when every client window start follows a server READY for the same
/// (seq, attempt).
bool client_windows_follow_ready(const std::vector<SessionEvent>& events);

// ---------------------------------------------------------------------------
// Sessions

/// Outcome of one client measurement window.
struct WindowOutcome {
    bool ok = false;
    HandshakeRecord record;
    std::string detail;  // failure reason when !ok
};

/// Client side of one data window.
class ClientWindow {
public:
    virtual ~ClientWindow() = default;
    virtual WindowOutcome run(const PlanEntry& entry, double window_seconds) = 0;
};

/// Server side of one data window: opened on GO, closed after RESULT.
class ServerWindow {
public:
    virtual ~ServerWindow() = default;
    virtual void open(const TestId& test) = 0;
    /// Returns a short summary for the RESULT acknowledgement.
    virtual std::string close() = 0;
};

struct SessionOptions {
    std::string machine_id = "machine";
    int protocol_version = kControlProtocolVersion;
    double timeout_seconds = 30.0;
    int max_retries = 3;
    EventLog* log = nullptr;
    /// Client only: called as each record is committed.
    std::function<void(const HandshakeRecord&)> on_record;
};

struct ServerSessionLog {
    int completed = 0;
    int retries = 0;
    std::vector<PlanEntry> skipped;
    std::string peer_machine_id;
};

/// Throws VERSION_MISMATCH and CONTROL_TIMEOUT. Tests that exhaust their
/// retries are skipped and listed rather than thrown.
ServerSessionLog run_server_session(ControlChannel& channel, const TestPlan& plan, ServerWindow& window,
                                    const SessionOptions& options);

struct ClientSessionResult {
    std::vector<HandshakeRecord> records;
    std::vector<PlanEntry> skipped;
    int retries = 0;
};

/// Throws VERSION_MISMATCH, CONTROL_TIMEOUT, PLAN_MISMATCH.
ClientSessionResult run_client_session(ControlChannel& channel, const TestPlan& plan, ClientWindow& window,
                                       const SessionOptions& options);

}  // namespace pqbench
