// SPDX-License-Identifier: Apache-2.0

#include "pqbench/handshake.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <condition_variable>
#include <cstring>
#include <deque>

#include "json.hpp"
#include "pqbench/record_csv.hpp"

namespace pqbench {

namespace fs = std::filesystem;

void write_frame(ByteStream& stream, ByteView payload) {
    const auto n = static_cast<std::uint32_t>(payload.size());
    Bytes buf(4 + payload.size());
    buf[0] = static_cast<std::uint8_t>(n >> 24);
    buf[1] = static_cast<std::uint8_t>(n >> 16);
    buf[2] = static_cast<std::uint8_t>(n >> 8);
    buf[3] = static_cast<std::uint8_t>(n);
    std::copy(payload.begin(), payload.end(), buf.begin() + 4);
    stream.write_all(buf);
}

Bytes read_frame(ByteStream& stream) {
    std::array<std::uint8_t, 4> len{};
    stream.read_exact(len);
    const std::uint32_t n = (std::uint32_t{len[0]} << 24) | (std::uint32_t{len[1]} << 16) |
                            (std::uint32_t{len[2]} << 8) | std::uint32_t{len[3]};
    if (n > kMaxFrameBytes) throw Error(ErrorCode::HandshakeMismatch, fmt::format("frame of {} bytes", n));
    Bytes out(n);
    stream.read_exact(out);
    return out;
}

// ---------------------------------------------------------------------------
// In-memory streams

namespace {

struct PipeState {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::uint8_t> data[2];  // indexed by receiving side: 0 client, 1 server
    std::uint64_t written[2] = {0, 0};  // indexed by sending side
    bool closed[2] = {false, false};
    TamperFn tamper_to_client;
};

class MemoryStream final : public ByteStream {
public:
    MemoryStream(std::shared_ptr<PipeState> state, int side, std::chrono::milliseconds timeout)
        : state_(std::move(state)), side_(side), timeout_(timeout) {}
    ~MemoryStream() override { close(); }

    void write_all(ByteView data) override {
        std::lock_guard lock(state_->mutex);
        if (state_->closed[side_]) throw Error(ErrorCode::StreamClosed, "write on closed stream");
        auto& q = state_->data[1 - side_];
        for (auto b : data) {
            if (side_ == 1 && state_->tamper_to_client) state_->tamper_to_client(state_->written[side_], b);
            q.push_back(b);
            ++state_->written[side_];
        }
        state_->cv.notify_all();
    }

    void read_exact(std::span<std::uint8_t> out) override {
        std::unique_lock lock(state_->mutex);
        auto& q = state_->data[side_];
        const bool ready = state_->cv.wait_for(lock, timeout_, [&] {
            return q.size() >= out.size() || state_->closed[1 - side_] || state_->closed[side_];
        });
        if (q.size() < out.size()) {
            if (!ready) throw Error(ErrorCode::ControlTimeout, "stream read timed out");
            throw Error(ErrorCode::StreamClosed, "stream closed mid-message");
        }
        std::copy_n(q.begin(), out.size(), out.begin());
        q.erase(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(out.size()));
    }

    void close() override {
        std::lock_guard lock(state_->mutex);
        state_->closed[side_] = true;
        state_->cv.notify_all();
    }

private:
    std::shared_ptr<PipeState> state_;
    int side_;
    std::chrono::milliseconds timeout_;
};

}  // namespace

StreamPair make_memory_stream_pair(TamperFn tamper_to_client, std::chrono::milliseconds timeout) {
    auto state = std::make_shared<PipeState>();
    state->tamper_to_client = std::move(tamper_to_client);
    StreamPair pair;
    pair.client = std::make_unique<MemoryStream>(state, 0, timeout);
    pair.server = std::make_unique<MemoryStream>(state, 1, timeout);
    pair.client_to_server_bytes = [state] {
        std::lock_guard lock(state->mutex);
        return state->written[0];
    };
    pair.server_to_client_bytes = [state] {
        std::lock_guard lock(state->mutex);
        return state->written[1];
    };
    return pair;
}

// ---------------------------------------------------------------------------
// Credentials

namespace {

constexpr std::string_view kCertMagic = "PQBENCH-MOCK-CERT/1";

Bytes certificate_header(const AlgorithmDescriptor& d) {
    Bytes header(kCertificateHeaderBytes, 0);
    const auto text = fmt::format("{}\nalg={}\npk={}\nsig={}\n", kCertMagic, d.id, d.public_key_bytes, d.payload_bytes);
    std::copy_n(text.begin(), std::min(text.size(), header.size()), header.begin());
    return header;
}

Bytes concat(std::initializer_list<ByteView> parts) {
    Bytes out;
    for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

Bytes as_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

[[noreturn]] void mismatch(const std::string& what) { throw Error(ErrorCode::HandshakeMismatch, what); }

}  // namespace

std::int64_t certificate_size(const AlgorithmDescriptor& sig) {
    return static_cast<std::int64_t>(kCertificateHeaderBytes) + sig.public_key_bytes + sig.payload_bytes;
}

ServerCredentials make_credentials(SigProvider& provider) {
    const auto& d = provider.descriptor();
    const auto kp = provider.keypair();
    const auto body = concat({certificate_header(d), kp.public_key});
    const auto signature = provider.sign(kp.secret_key, body);
    return {concat({body, signature}), kp.secret_key};
}

Bytes certificate_public_key(SigProvider& provider, ByteView certificate) {
    const auto& d = provider.descriptor();
    if (static_cast<std::int64_t>(certificate.size()) != certificate_size(d)) {
        mismatch(fmt::format("certificate of {} bytes, expected {}", certificate.size(), certificate_size(d)));
    }
    const auto expected_header = certificate_header(d);
    if (!std::equal(expected_header.begin(), expected_header.end(), certificate.begin())) {
        mismatch("certificate header does not match " + d.id);
    }
    const auto body_len = kCertificateHeaderBytes + static_cast<std::size_t>(d.public_key_bytes);
    const auto body = certificate.first(body_len);
    if (!provider.verify(body.subspan(kCertificateHeaderBytes), body, certificate.subspan(body_len))) {
        mismatch("certificate self-signature does not verify");
    }
    const auto pk = body.subspan(kCertificateHeaderBytes);
    return Bytes(pk.begin(), pk.end());
}

const CredentialEntry* CredentialManifest::find(std::string_view id) const {
    const auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.algorithm_id == id; });
    return it == entries.end() ? nullptr : &*it;
}

CredentialManifest generate_credentials(const Registry& registry, const fs::path& out_dir, std::uint64_t seed) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) {
        throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + (ec ? ": " + ec.message() : ""));
    }
    CredentialManifest manifest;
    nlohmann::json doc = {{"entries", nlohmann::json::array()}};
    for (const auto& d : registry) {
        if (d.family != Family::Signature) continue;
        auto provider = mock_sig(d, seed, MockCostProfile::uniform(0));
        const auto creds = make_credentials(*provider);
        CredentialEntry entry{d.id, out_dir / (d.id + ".crt"), static_cast<std::int64_t>(creds.certificate.size()),
                              out_dir / (d.id + ".key")};
        write_text_file(entry.certificate_file,
                        std::string_view(reinterpret_cast<const char*>(creds.certificate.data()), creds.certificate.size()));
        write_text_file(entry.key_file,
                        std::string_view(reinterpret_cast<const char*>(creds.secret_key.data()), creds.secret_key.size()));
        doc["entries"].push_back({{"algorithm", d.id},
                                  {"certificate_file", entry.certificate_file.filename().string()},
                                  {"certificate_bytes", entry.certificate_bytes},
                                  {"key_file", entry.key_file.filename().string()}});
        manifest.entries.push_back(std::move(entry));
    }
    write_text_file(out_dir / "manifest.json", doc.dump(2) + "\n");
    return manifest;
}

CredentialManifest load_manifest(const fs::path& out_dir) {
    const auto text = read_text_file(out_dir / "manifest.json");
    CredentialManifest manifest;
    try {
        const auto doc = nlohmann::json::parse(text);
        for (const auto& e : doc.at("entries")) {
            manifest.entries.push_back({e.at("algorithm").get<std::string>(),
                                        out_dir / e.at("certificate_file").get<std::string>(),
                                        e.at("certificate_bytes").get<std::int64_t>(),
                                        out_dir / e.at("key_file").get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, "bad credential manifest: " + std::string(e.what()));
    }
    return manifest;
}

ServerCredentials load_credentials(const CredentialEntry& entry) {
    const auto cert = read_text_file(entry.certificate_file);
    const auto key = read_text_file(entry.key_file);
    if (static_cast<std::int64_t>(cert.size()) != entry.certificate_bytes) {
        throw Error(ErrorCode::InvalidConfig, fmt::format("{} holds {} bytes, manifest says {}",
                                                          entry.certificate_file.string(), cert.size(),
                                                          entry.certificate_bytes));
    }
    return {as_bytes(cert), as_bytes(key)};
}

// ---------------------------------------------------------------------------
// Handshake

SessionToken SessionCache::issue(ByteView shared_secret) {
    std::lock_guard lock(mutex_);
    const auto n = ++counter_;
    const auto h = mock::digest(
        "token", {shared_secret, ByteView(reinterpret_cast<const std::uint8_t*>(&n), sizeof n)});
    SessionToken token{};
    std::copy_n(h.begin(), token.size(), token.begin());
    sessions_[token] = Bytes(shared_secret.begin(), shared_secret.end());
    return token;
}

bool SessionCache::contains(const SessionToken& token) const {
    std::lock_guard lock(mutex_);
    return sessions_.count(token) != 0;
}

void SessionCache::clear() {
    std::lock_guard lock(mutex_);
    sessions_.clear();
}

std::size_t SessionCache::size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

namespace {

Bytes transcript(ByteView pk, ByteView ct) {
    const auto h = mock::digest("transcript", {pk, ct});
    return Bytes(h.begin(), h.end());
}

Bytes confirm_tag(ByteView ss) {
    const auto h = mock::digest("confirm", {ss});
    return Bytes(h.begin(), h.end());
}

template <class Fn>
auto guarded(std::string_view what, Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        mismatch(std::string(what) + ": " + e.what());
    }
}

void client_full(ByteStream& stream, SigProvider& sig, KemProvider& kem, std::optional<SessionToken>* token_out) {
    const auto kp = kem.keygen();
    write_frame(stream, kp.public_key);
    const auto ct = read_frame(stream);
    const auto cert = read_frame(stream);
    const auto signature = read_frame(stream);
    const auto confirm = read_frame(stream);
    const auto token = read_frame(stream);

    const auto server_pk = certificate_public_key(sig, cert);
    if (!sig.verify(server_pk, transcript(kp.public_key, ct), signature)) mismatch("transcript signature rejected");
    const auto ss = guarded("decaps", [&] { return kem.decaps(kp.secret_key, ct); });
    if (confirm != confirm_tag(ss)) mismatch("shared secrets disagree");
    if (token.size() != SessionToken{}.size()) mismatch("bad session token");
    if (token_out != nullptr) {
        SessionToken t{};
        std::copy(token.begin(), token.end(), t.begin());
        *token_out = t;
    }
}

void server_full(ByteStream& stream, SigProvider& sig, KemProvider& kem, const ServerCredentials& creds,
                 SessionCache& cache, ByteView pk) {
    const auto enc = guarded("encaps", [&] { return kem.encaps(pk); });
    const auto signature = sig.sign(creds.secret_key, transcript(pk, enc.ciphertext));
    const auto token = cache.issue(enc.shared_secret);
    write_frame(stream, enc.ciphertext);
    write_frame(stream, creds.certificate);
    write_frame(stream, signature);
    write_frame(stream, confirm_tag(enc.shared_secret));
    write_frame(stream, token);
}

}  // namespace

void client_handshake(ByteStream& stream, SigProvider& sig_provider, KemProvider& kem_provider, HandshakeMode mode,
                      std::optional<SessionToken>& token) {
    if (mode == HandshakeMode::FirstUse) {
        client_full(stream, sig_provider, kem_provider, nullptr);
        return;
    }
    if (!token) {
        write_frame(stream, {});
        client_full(stream, sig_provider, kem_provider, &token);
        return;
    }
    const auto kp = kem_provider.keygen();
    write_frame(stream, *token);
    write_frame(stream, kp.public_key);
    const auto accept = read_frame(stream);
    if (accept.size() != 1 || accept[0] != 1) mismatch("server rejected the session token");
    const auto ct = read_frame(stream);
    const auto confirm = read_frame(stream);
    const auto ss = guarded("decaps", [&] { return kem_provider.decaps(kp.secret_key, ct); });
    if (confirm != confirm_tag(ss)) mismatch("shared secrets disagree");
}

void server_handshake(ByteStream& stream, SigProvider& sig_provider, KemProvider& kem_provider, HandshakeMode mode,
                      const ServerCredentials& credentials, SessionCache& cache) {
    if (mode == HandshakeMode::FirstUse) {
        const auto pk = read_frame(stream);
        server_full(stream, sig_provider, kem_provider, credentials, cache, pk);
        return;
    }
    const auto token = read_frame(stream);
    if (token.empty()) {
        const auto pk = read_frame(stream);
        server_full(stream, sig_provider, kem_provider, credentials, cache, pk);
        return;
    }
    const auto pk = read_frame(stream);
    SessionToken t{};
    const bool known = token.size() == t.size() && (std::copy(token.begin(), token.end(), t.begin()), cache.contains(t));
    if (!known) {
        write_frame(stream, Bytes{0});
        mismatch("unknown session token");
    }
    const auto enc = guarded("encaps", [&] { return kem_provider.encaps(pk); });
    write_frame(stream, Bytes{1});
    write_frame(stream, enc.ciphertext);
    write_frame(stream, confirm_tag(enc.shared_secret));
}

}  // namespace pqbench
