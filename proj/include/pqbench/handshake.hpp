// SPDX-License-Identifier: Apache-2.0

// Simulated TLS-1.3-shaped handshake over a byte stream. Every payload is
// framed with a 4-byte big-endian length.
//
// FIRST_USE
//   C -> S  pk
//   S -> C  ct, certificate, sig(pk || ct), confirm = H(ss), token
//   C       decaps, verifies certificate and transcript, checks confirm
//
// SESSION_REUSE (signature work and certificate skipped)
//   C -> S  token (empty to ask for a full handshake), then as FIRST_USE
//           when the token is empty, else pk
//   S -> C  accept byte; on accept: ct, confirm

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pqbench/model.hpp"
#include "pqbench/provider.hpp"

namespace pqbench {

/// Blocking byte stream. Reads throw STREAM_CLOSED on EOF and
/// CONTROL_TIMEOUT when the stream's deadline passes.
class ByteStream {
public:
    virtual ~ByteStream() = default;
    virtual void write_all(ByteView data) = 0;
    virtual void read_exact(std::span<std::uint8_t> out) = 0;
    virtual void close() = 0;
};

/// Frames larger than this are rejected as corrupt.
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 20;

void write_frame(ByteStream& stream, ByteView payload);
Bytes read_frame(ByteStream& stream);

/// Rewrites bytes in flight: called with the absolute offset of each byte in
/// its direction.
using TamperFn = std::function<void(std::uint64_t offset, std::uint8_t& byte)>;

struct StreamPair {
    std::unique_ptr<ByteStream> client;
    std::unique_ptr<ByteStream> server;
    /// Total bytes written so far, per direction.
    std::function<std::uint64_t()> client_to_server_bytes;
    std::function<std::uint64_t()> server_to_client_bytes;
};

/// Connected in-memory streams. `tamper_to_client` edits server -> client bytes.
StreamPair make_memory_stream_pair(TamperFn tamper_to_client = {},
                                   std::chrono::milliseconds timeout = std::chrono::seconds(5));

// ---------------------------------------------------------------------------
// Credentials

/// Size of the fixed header that precedes the public key in a mock certificate.
inline constexpr std::size_t kCertificateHeaderBytes = 256;

/// header || public key || signature(header || public key).
std::int64_t certificate_size(const AlgorithmDescriptor& sig);

struct ServerCredentials {
    Bytes certificate;
    Bytes secret_key;
};

/// Deterministic self-signed mock certificate for `sig`.
ServerCredentials make_credentials(SigProvider& provider);

/// Public key embedded in a certificate. Throws HANDSHAKE_MISMATCH if the
/// certificate is malformed or its self-signature fails.
Bytes certificate_public_key(SigProvider& provider, ByteView certificate);

struct CredentialEntry {
    std::string algorithm_id;
    std::filesystem::path certificate_file;
    std::int64_t certificate_bytes = 0;
    std::filesystem::path key_file;

    friend bool operator==(const CredentialEntry&, const CredentialEntry&) = default;
};

struct CredentialManifest {
    std::vector<CredentialEntry> entries;

    const CredentialEntry* find(std::string_view id) const;
    friend bool operator==(const CredentialManifest&, const CredentialManifest&) = default;
};

/// Writes `<id>.crt`, `<id>.key` and `manifest.json` for every signature
/// scheme in the registry. Throws IO_ERROR.
CredentialManifest generate_credentials(const Registry& registry, const std::filesystem::path& out_dir,
                                        std::uint64_t seed = 42);
/// Throws IO_ERROR or INVALID_CONFIG.
CredentialManifest load_manifest(const std::filesystem::path& out_dir);
/// Reads the certificate and key named by `entry`.
ServerCredentials load_credentials(const CredentialEntry& entry);

// ---------------------------------------------------------------------------
// Handshake

using SessionToken = std::array<std::uint8_t, 8>;

/// Server-side store of issued session tokens.
class SessionCache {
public:
    SessionToken issue(ByteView shared_secret);
    bool contains(const SessionToken& token) const;
    void clear();
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<SessionToken, Bytes> sessions_;
    std::uint64_t counter_ = 0;
};

/// Client side. In SESSION_REUSE mode `token` is presented when set and
/// filled in after a full handshake. Throws HANDSHAKE_MISMATCH or
/// STREAM_CLOSED.
void client_handshake(ByteStream& stream, SigProvider& sig_provider, KemProvider& kem_provider,
                      HandshakeMode mode, std::optional<SessionToken>& token);

/// Server side of one connection. Throws HANDSHAKE_MISMATCH (after telling
/// the client) for an unknown token, or STREAM_CLOSED.
void server_handshake(ByteStream& stream, SigProvider& sig_provider, KemProvider& kem_provider, HandshakeMode mode,
                      const ServerCredentials& credentials, SessionCache& cache);

}  // namespace pqbench
