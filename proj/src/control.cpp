// SPDX-License-Identifier: Apache-2.0

#include "pqbench/control.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <map>

namespace pqbench {

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedControl, what); }

std::chrono::milliseconds to_ms(double seconds) {
    return std::chrono::milliseconds(static_cast<std::int64_t>(std::max(seconds, 0.001) * 1000.0));
}

int parse_int(std::string_view text, std::string_view field) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        malformed(fmt::format("{} '{}' is not an integer", field, text));
    }
    return v;
}

std::optional<Suite> parse_suite(std::string_view text) {
    if (text == "HANDSHAKE") return Suite::Handshake;
    if (text == "SPEED") return Suite::Speed;
    return std::nullopt;
}

bool is_token(std::string_view s) {
    return !s.empty() && s.find_first_of(" \t\r\n") == std::string_view::npos;
}

bool is_text(std::string_view s) { return s.find_first_of("\r\n") == std::string_view::npos; }

std::vector<std::string_view> split_spaces(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto sp = s.find(' ', start);
        out.push_back(s.substr(start, sp == std::string_view::npos ? sp : sp - start));
        if (sp == std::string_view::npos) break;
        start = sp + 1;
    }
    return out;
}

// "key=value key=value" payloads of RESULT and ERR.
std::map<std::string, std::string, std::less<>> parse_kv(std::string_view text) {
    std::map<std::string, std::string, std::less<>> out;
    for (auto part : split_spaces(text)) {
        const auto eq = part.find('=');
        if (eq == std::string_view::npos) continue;
        out.emplace(std::string(part.substr(0, eq)), std::string(part.substr(eq + 1)));
    }
    return out;
}

std::optional<int> kv_int(const std::map<std::string, std::string, std::less<>>& kv, std::string_view key) {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    int v = 0;
    const auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc{} || ptr != it->second.data() + it->second.size()) return std::nullopt;
    return v;
}

}  // namespace

std::string_view to_string(Suite suite) noexcept { return suite == Suite::Handshake ? "HANDSHAKE" : "SPEED"; }

std::string TestId::str() const { return fmt::format("{}|{}|{}", sig_id, kem_id, to_string(mode)); }

TestId TestId::parse(std::string_view text) {
    const auto a = text.find('|');
    const auto b = a == std::string_view::npos ? a : text.find('|', a + 1);
    if (b == std::string_view::npos || text.find('|', b + 1) != std::string_view::npos) {
        malformed(fmt::format("test id '{}' is not <sig>|<kem>|<mode>", text));
    }
    TestId id;
    id.sig_id = std::string(text.substr(0, a));
    id.kem_id = std::string(text.substr(a + 1, b - a - 1));
    const auto mode = parse_handshake_mode(text.substr(b + 1));
    if (!mode || !is_valid_algorithm_id(id.sig_id) || !is_valid_algorithm_id(id.kem_id)) {
        malformed(fmt::format("test id '{}' is not <sig>|<kem>|<mode>", text));
    }
    id.mode = *mode;
    return id;
}

std::string encode_control(const ControlMessage& msg) {
    auto token = [](std::string_view s, std::string_view field) {
        if (!is_token(s)) malformed(fmt::format("{} '{}' is empty or contains whitespace", field, s));
        return s;
    };
    auto test = [&](const std::string& s) {
        (void)TestId::parse(token(s, "test id"));
        return std::string_view(s);
    };
    auto text = [](std::string_view s) {
        if (!is_text(s)) malformed("field contains a line break");
        return s;
    };
    return std::visit(
        [&](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, control::Hello>) {
                return fmt::format("HELLO {} {}", m.version, token(m.machine_id, "machine id"));
            } else if constexpr (std::is_same_v<T, control::Ready>) {
                return fmt::format("READY {} {} {} {}", to_string(m.suite), test(m.test_id), m.seq, m.attempt);
            } else if constexpr (std::is_same_v<T, control::Go>) {
                return fmt::format("GO {}", test(m.test_id));
            } else if constexpr (std::is_same_v<T, control::Result>) {
                if (m.payload.empty()) return fmt::format("RESULT {}", test(m.test_id));
                return fmt::format("RESULT {} {}", test(m.test_id), text(m.payload));
            } else if constexpr (std::is_same_v<T, control::Retry>) {
                return fmt::format("RETRY {} {}", test(m.test_id), m.attempt);
            } else if constexpr (std::is_same_v<T, control::Done>) {
                return fmt::format("DONE {}", to_string(m.suite));
            } else {
                if (m.detail.empty()) return fmt::format("ERR {}", token(m.code, "code"));
                return fmt::format("ERR {} {}", token(m.code, "code"), text(m.detail));
            }
        },
        msg);
}

ControlMessage decode_control(std::string_view line) {
    if (line.size() > kMaxControlLineBytes) malformed(fmt::format("line of {} bytes exceeds the limit", line.size()));
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!is_text(line)) malformed("embedded line break");
    const auto sp = line.find(' ');
    const auto verb = line.substr(0, sp);
    const auto rest = sp == std::string_view::npos ? std::string_view{} : line.substr(sp + 1);

    // Verbs whose last field is free text.
    if (verb == "RESULT" || verb == "ERR") {
        const auto sp2 = rest.find(' ');
        const auto first = rest.substr(0, sp2);
        const auto tail = sp2 == std::string_view::npos ? std::string_view{} : rest.substr(sp2 + 1);
        if (!is_token(first)) malformed(fmt::format("{} needs at least one field", verb));
        if (verb == "RESULT") {
            (void)TestId::parse(first);
            return control::Result{std::string(first), std::string(tail)};
        }
        return control::Err{std::string(first), std::string(tail)};
    }

    const auto fields = rest.empty() ? std::vector<std::string_view>{} : split_spaces(rest);
    auto expect = [&](std::size_t n) {
        if (fields.size() != n) malformed(fmt::format("{} takes {} fields, got {}", verb, n, fields.size()));
        for (auto f : fields) {
            if (f.empty()) malformed(fmt::format("{} has an empty field", verb));
        }
    };
    auto test = [](std::string_view s) {
        (void)TestId::parse(s);
        return std::string(s);
    };
    auto suite = [](std::string_view s) {
        const auto v = parse_suite(s);
        if (!v) malformed(fmt::format("unknown suite '{}'", s));
        return *v;
    };

    if (verb == "HELLO") {
        expect(2);
        return control::Hello{parse_int(fields[0], "version"), std::string(fields[1])};
    }
    if (verb == "READY") {
        expect(4);
        const int seq = parse_int(fields[2], "seq");
        const int attempt = parse_int(fields[3], "attempt");
        if (seq < 1 || attempt < 1) malformed("seq and attempt must be >= 1");
        return control::Ready{suite(fields[0]), test(fields[1]), seq, attempt};
    }
    if (verb == "GO") {
        expect(1);
        return control::Go{test(fields[0])};
    }
    if (verb == "RETRY") {
        expect(2);
        const int attempt = parse_int(fields[1], "attempt");
        if (attempt < 1) malformed("attempt must be >= 1");
        return control::Retry{test(fields[0]), attempt};
    }
    if (verb == "DONE") {
        expect(1);
        return control::Done{suite(fields[0])};
    }
    malformed(fmt::format("unknown verb '{}'", verb));
}

// ---------------------------------------------------------------------------
// Plan

std::vector<PlanEntry> TestPlan::entries() const {
    std::vector<PlanEntry> out;
    out.reserve(tests.size() * static_cast<std::size_t>(std::max(num_runs, 0)));
    for (int r = 0; r < num_runs; ++r) {
        for (const auto& t : tests) out.push_back({t, first_run_index + r});
    }
    return out;
}

TestPlan make_test_plan(const Registry& registry, const std::vector<std::string>& sig_ids,
                        const std::vector<std::string>& kem_ids, double window_seconds, int num_runs,
                        int first_run_index) {
    auto select = [&](const std::vector<std::string>& ids, Family family) {
        std::vector<std::string> out;
        if (ids.empty()) {
            for (const auto& d : registry) {
                if (d.family == family && d.capabilities.has(Capability::Handshake)) out.push_back(d.id);
            }
            return out;
        }
        for (const auto& id : ids) {
            const auto* d = registry.find(id);
            if (d == nullptr) throw Error(ErrorCode::InvalidConfig, "unknown algorithm '" + id + "'");
            if (d->family != family) {
                throw Error(ErrorCode::InvalidConfig, fmt::format("'{}' is not a {}", id, to_string(family)));
            }
            if (!d->capabilities.has(Capability::Handshake)) {
                throw Error(ErrorCode::InvalidConfig, "'" + id + "' lacks the HANDSHAKE capability");
            }
            out.push_back(d->id);
        }
        return out;
    };
    TestPlan plan;
    plan.window_seconds = window_seconds;
    plan.num_runs = num_runs;
    plan.first_run_index = first_run_index;
    for (const auto& sig : select(sig_ids, Family::Signature)) {
        for (const auto& kem : select(kem_ids, Family::Kem)) {
            plan.tests.push_back({sig, kem, HandshakeMode::FirstUse});
            plan.tests.push_back({sig, kem, HandshakeMode::SessionReuse});
        }
    }
    return plan;
}

// ---------------------------------------------------------------------------
// In-memory transport

namespace {

struct MemoryState {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::string> queue[2];  // indexed by receiving side: 0 client, 1 server
    bool closed[2] = {false, false};   // indexed by side
    DropPolicy drop;
};

class MemoryChannel final : public ControlChannel {
public:
    MemoryChannel(std::shared_ptr<MemoryState> state, int side) : state_(std::move(state)), side_(side) {}
    ~MemoryChannel() override { close(); }

    void send(const ControlMessage& msg) override {
        auto line = encode_control(msg);
        const auto dir = side_ == 0 ? Direction::ClientToServer : Direction::ServerToClient;
        std::lock_guard lock(state_->mutex);
        if (state_->closed[side_]) throw Error(ErrorCode::StreamClosed, "send on closed channel");
        if (state_->drop && state_->drop(dir, msg)) return;
        state_->queue[1 - side_].push_back(std::move(line));
        state_->cv.notify_all();
    }

    std::optional<ControlMessage> receive(std::chrono::milliseconds timeout) override {
        std::unique_lock lock(state_->mutex);
        auto& q = state_->queue[side_];
        state_->cv.wait_for(lock, timeout, [&] { return !q.empty() || state_->closed[1 - side_]; });
        if (!q.empty()) {
            const auto line = std::move(q.front());
            q.pop_front();
            lock.unlock();
            return decode_control(line);
        }
        if (state_->closed[1 - side_]) throw Error(ErrorCode::StreamClosed, "peer closed the control channel");
        return std::nullopt;
    }

    void close() override {
        std::lock_guard lock(state_->mutex);
        state_->closed[side_] = true;
        state_->cv.notify_all();
    }

private:
    std::shared_ptr<MemoryState> state_;
    int side_;
};

}  // namespace

MemoryChannelPair make_memory_channel_pair(DropPolicy drop) {
    auto state = std::make_shared<MemoryState>();
    state->drop = std::move(drop);
    return {std::make_unique<MemoryChannel>(state, 0), std::make_unique<MemoryChannel>(state, 1)};
}

// ---------------------------------------------------------------------------
// Event log

void EventLog::append(EventKind kind, int seq, int attempt) {
    std::lock_guard lock(mutex_);
    events_.push_back({kind, seq, attempt});
}

std::vector<SessionEvent> EventLog::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

bool client_windows_follow_ready(const std::vector<SessionEvent>& events) {
    std::vector<std::pair<int, int>> readied;
    for (const auto& e : events) {
        if (e.kind == EventKind::ServerReady) readied.emplace_back(e.seq, e.attempt);
        if (e.kind == EventKind::ClientWindowStart &&
            std::find(readied.begin(), readied.end(), std::pair(e.seq, e.attempt)) == readied.end()) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Server session

namespace {

void log_event(const SessionOptions& o, EventKind kind, int seq, int attempt) {
    if (o.log != nullptr) o.log->append(kind, seq, attempt);
}

using Clock = std::chrono::steady_clock;

/// Receives until `accept` returns true for a message or the deadline passes.
template <class Accept>
bool await(ControlChannel& channel, Clock::time_point deadline, Accept&& accept) {
    while (true) {
        const auto now = Clock::now();
        if (now >= deadline) return false;
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now) +
                          std::chrono::milliseconds(1);
        auto msg = channel.receive(left);
        if (!msg) continue;
        if (const auto* err = std::get_if<control::Err>(&*msg)) {
            throw Error(parse_error_code(err->code).value_or(ErrorCode::MalformedControl), "client: " + err->detail);
        }
        if (accept(*msg)) return true;
    }
}

std::string sanitize_token(std::string s) {
    for (auto& c : s) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') c = '_';
    }
    return s.empty() ? "-" : s;
}

}  // namespace

ServerSessionLog run_server_session(ControlChannel& channel, const TestPlan& plan, ServerWindow& window,
                                    const SessionOptions& options) {
    const auto timeout = to_ms(options.timeout_seconds);
    const control::Hello hello{options.protocol_version, options.machine_id};
    ServerSessionLog log;

    // HELLO exchange.
    std::optional<control::Hello> peer;
    for (int waited = 0; !peer; ++waited) {
        if (waited > options.max_retries + 1) throw Error(ErrorCode::ControlTimeout, "no HELLO from client");
        const auto msg = channel.receive(timeout);
        if (msg && std::holds_alternative<control::Hello>(*msg)) peer = std::get<control::Hello>(*msg);
    }
    if (peer->version != options.protocol_version) {
        const auto detail = fmt::format("server speaks {}, client {}", options.protocol_version, peer->version);
        channel.send(control::Err{std::string(to_string(ErrorCode::VersionMismatch)), detail});
        throw Error(ErrorCode::VersionMismatch, detail);
    }
    log.peer_machine_id = peer->machine_id;
    channel.send(hello);

    const auto entries = plan.entries();
    const auto result_wait = to_ms(plan.window_seconds) + timeout;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const int seq = static_cast<int>(i) + 1;
        const auto tid = entries[i].test.str();
        bool done = false;
        for (int attempt = 1; attempt <= options.max_retries + 1 && !done; ++attempt) {
            if (attempt > 1) {
                ++log.retries;
                channel.send(control::Retry{tid, attempt});
            }
            log_event(options, EventKind::ServerReady, seq, attempt);
            channel.send(control::Ready{Suite::Handshake, tid, seq, attempt});

            const bool got_go = await(channel, Clock::now() + timeout, [&](const ControlMessage& m) {
                if (const auto* go = std::get_if<control::Go>(&m)) return go->test_id == tid;
                if (std::holds_alternative<control::Hello>(m)) channel.send(hello);  // our reply was lost
                return false;
            });
            if (!got_go) continue;

            log_event(options, EventKind::ServerWindowOpen, seq, attempt);
            window.open(entries[i].test);
            bool ok = false;
            const bool got_result = await(channel, Clock::now() + result_wait, [&](const ControlMessage& m) {
                const auto* r = std::get_if<control::Result>(&m);
                if (r == nullptr || r->test_id != tid) return false;
                const auto kv = parse_kv(r->payload);
                if (kv_int(kv, "seq") != seq || kv_int(kv, "attempt") != attempt) return false;
                const auto status = kv.find("status");
                ok = status != kv.end() && status->second == "ok";
                return true;
            });
            const auto summary = window.close();
            log_event(options, EventKind::ServerWindowClose, seq, attempt);
            if (!got_result || !ok) continue;

            channel.send(control::Result{
                tid, fmt::format("seq={} attempt={} status=ok served={}", seq, attempt, sanitize_token(summary))});
            ++log.completed;
            done = true;
        }
        if (!done) {
            log.skipped.push_back(entries[i]);
            channel.send(control::Err{std::string(to_string(ErrorCode::TooManyRetries)),
                                      fmt::format("seq={} test={}", seq, tid)});
        }
    }

    // DONE exchange. A client that closes after the plan has finished counts
    // as done even if its DONE was lost.
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        try {
            channel.send(control::Done{Suite::Handshake});
            if (await(channel, Clock::now() + timeout,
                      [](const ControlMessage& m) { return std::holds_alternative<control::Done>(m); })) {
                return log;
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::StreamClosed) return log;
            throw;
        }
    }
    throw Error(ErrorCode::ControlTimeout, "client never acknowledged DONE");
}

// ---------------------------------------------------------------------------
// Client session

namespace {

class ClientSession {
public:
    ClientSession(ControlChannel& channel, const TestPlan& plan, ClientWindow& window, const SessionOptions& options)
        : channel_(channel),
          plan_(plan),
          window_(window),
          options_(options),
          entries_(plan.entries()),
          state_(entries_.size(), State::Open) {}

    ClientSessionResult run() {
        const auto hello_wait = to_ms(options_.timeout_seconds);
        const auto wait = to_ms(plan_.window_seconds + 2 * options_.timeout_seconds);
        std::optional<ControlMessage> first = handshake_hello(hello_wait);
        if (first && handle(*first)) return finish();

        int timeouts = 0;
        while (true) {
            const auto msg = channel_.receive(wait);
            if (!msg) {
                if (++timeouts > options_.max_retries + 2) {
                    throw Error(ErrorCode::ControlTimeout, "server went silent");
                }
                continue;
            }
            timeouts = 0;
            if (handle(*msg)) return finish();
        }
    }

private:
    enum class State { Open, Committed, Skipped };

    struct Pending {
        std::size_t index;
        int attempt;
        WindowOutcome outcome;
    };

    std::optional<ControlMessage> handshake_hello(std::chrono::milliseconds wait) {
        const control::Hello hello{options_.protocol_version, options_.machine_id};
        for (int sent = 0; sent <= options_.max_retries + 1; ++sent) {
            channel_.send(hello);
            const auto deadline = std::chrono::steady_clock::now() + wait;
            while (std::chrono::steady_clock::now() < deadline) {
                const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                                      deadline - std::chrono::steady_clock::now()) +
                                  std::chrono::milliseconds(1);
                auto msg = channel_.receive(left);
                if (!msg) break;
                if (const auto* h = std::get_if<control::Hello>(&*msg)) {
                    if (h->version != options_.protocol_version) {
                        throw Error(ErrorCode::VersionMismatch,
                                    fmt::format("client speaks {}, server {}", options_.protocol_version, h->version));
                    }
                    return std::nullopt;
                }
                // The server only sends these after accepting our HELLO.
                if (std::holds_alternative<control::Ready>(*msg) || std::holds_alternative<control::Err>(*msg) ||
                    std::holds_alternative<control::Done>(*msg)) {
                    return msg;
                }
            }
        }
        throw Error(ErrorCode::ControlTimeout, "no HELLO from server");
    }

    // Returns true when the session is over.
    bool handle(const ControlMessage& msg) {
        if (const auto* m = std::get_if<control::Ready>(&msg)) {
            on_ready(*m);
        } else if (const auto* m = std::get_if<control::Retry>(&msg)) {
            if (pending_ && entries_[pending_->index].test.str() == m->test_id) {
                next_ = pending_->index;
                pending_.reset();
                ++result_.retries;
            }
        } else if (const auto* m = std::get_if<control::Result>(&msg)) {
            const auto kv = parse_kv(m->payload);
            if (pending_ && kv_int(kv, "seq") == static_cast<int>(pending_->index) + 1 &&
                kv_int(kv, "attempt") == pending_->attempt) {
                commit();
            }
        } else if (const auto* m = std::get_if<control::Err>(&msg)) {
            on_err(*m);
        } else if (std::holds_alternative<control::Done>(msg)) {
            commit();
            channel_.send(control::Done{Suite::Handshake});
            return true;
        }
        return false;
    }

    void on_ready(const control::Ready& m) {
        const auto index = static_cast<std::size_t>(m.seq - 1);
        if (m.seq < 1 || index >= entries_.size()) {
            mismatch(fmt::format("READY for position {} of a {}-test plan", m.seq, entries_.size()));
        }
        if (pending_) {
            if (pending_->index < index) {
                commit();
            } else if (pending_->index == index) {
                pending_.reset();  // the RETRY was lost
                next_ = index;
                ++result_.retries;
            } else {
                return;  // stale
            }
        }
        if (state_[index] != State::Open) return;  // duplicate of a finished test
        if (entries_[index].test.str() != m.test_id) {
            mismatch(fmt::format("server test {} is '{}', ours is '{}'", m.seq, m.test_id,
                                 entries_[index].test.str()));
        }
        for (auto j = next_; j < index; ++j) skip(j);

        const auto& tid = m.test_id;
        channel_.send(control::Go{tid});
        if (options_.log != nullptr) options_.log->append(EventKind::ClientWindowStart, m.seq, m.attempt);
        WindowOutcome outcome;
        try {
            outcome = window_.run(entries_[index], plan_.window_seconds);
        } catch (const std::exception& e) {
            outcome.ok = false;
            outcome.detail = e.what();
        }
        if (options_.log != nullptr) options_.log->append(EventKind::ClientWindowEnd, m.seq, m.attempt);

        std::string payload = fmt::format("seq={} attempt={}", m.seq, m.attempt);
        if (outcome.ok) {
            const auto& r = outcome.record;
            payload += fmt::format(" status=ok connections={} real_seconds={:.6f} user_cps={:.6f}", r.connections,
                                   r.real_seconds, r.user_connections_per_sec);
        } else {
            payload += " status=fail reason=" + sanitize_token(outcome.detail);
        }
        channel_.send(control::Result{tid, payload});
        pending_ = Pending{index, m.attempt, std::move(outcome)};
        next_ = index + 1;
    }

    void on_err(const control::Err& m) {
        const auto code = parse_error_code(m.code);
        if (code == ErrorCode::TooManyRetries) {
            const auto seq = kv_int(parse_kv(m.detail), "seq");
            if (!seq || *seq < 1 || static_cast<std::size_t>(*seq) > entries_.size()) return;
            const auto index = static_cast<std::size_t>(*seq - 1);
            if (pending_ && pending_->index == index) pending_.reset();
            for (auto j = next_; j <= index; ++j) skip(j);
            next_ = std::max(next_, index + 1);
            return;
        }
        throw Error(code.value_or(ErrorCode::MalformedControl), "server: " + m.detail);
    }

    void commit() {
        if (!pending_) return;
        const auto index = pending_->index;
        if (pending_->outcome.ok) {
            auto record = std::move(pending_->outcome.record);
            record.sig_algorithm_id = entries_[index].test.sig_id;
            record.kem_algorithm_id = entries_[index].test.kem_id;
            record.mode = entries_[index].test.mode;
            record.run_index = entries_[index].run_index;
            if (options_.on_record) options_.on_record(record);
            result_.records.push_back(std::move(record));
            state_[index] = State::Committed;
        } else {
            skip(index);
        }
        pending_.reset();
    }

    void skip(std::size_t index) {
        if (state_[index] != State::Open) return;
        state_[index] = State::Skipped;
        result_.skipped.push_back(entries_[index]);
    }

    [[noreturn]] void mismatch(const std::string& detail) {
        channel_.send(control::Err{std::string(to_string(ErrorCode::PlanMismatch)), detail});
        throw Error(ErrorCode::PlanMismatch, detail);
    }

    ClientSessionResult finish() {
        for (std::size_t j = 0; j < entries_.size(); ++j) skip(j);
        return std::move(result_);
    }

    ControlChannel& channel_;
    const TestPlan& plan_;
    ClientWindow& window_;
    const SessionOptions& options_;
    std::vector<PlanEntry> entries_;
    std::vector<State> state_;
    std::optional<Pending> pending_;
    std::size_t next_ = 0;
    ClientSessionResult result_;
};

}  // namespace

ClientSessionResult run_client_session(ControlChannel& channel, const TestPlan& plan, ClientWindow& window,
                                       const SessionOptions& options) {
    return ClientSession(channel, plan, window, options).run();
}

}  // namespace pqbench
