// SPDX-License-Identifier: Apache-2.0

#include "pqbench/handshake.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <future>
#include <random>

#include "pqbench/record_csv.hpp"

using namespace pqbench;
namespace fs = std::filesystem;

namespace {

template <class Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Usage;
}

struct Peer {
    std::unique_ptr<SigProvider> sig;
    std::unique_ptr<KemProvider> kem;
};

Peer make_peer(const Registry& reg, const std::string& sig_id, const std::string& kem_id, std::uint64_t seed) {
    return {mock_sig(*reg.find(sig_id), seed, MockCostProfile::uniform(1)),
            mock_kem(*reg.find(kem_id), seed, MockCostProfile::uniform(1))};
}

/// One handshake over `pair`; returns the client's error code, if any.
/// The server's outcome goes to `server_error`.
std::optional<ErrorCode> handshake_once(StreamPair& pair, Peer& client, Peer& server, const ServerCredentials& creds,
                                        SessionCache& cache, HandshakeMode mode, std::optional<SessionToken>& token,
                                        std::optional<ErrorCode>* server_error = nullptr) {
    auto srv = std::async(std::launch::async, [&]() -> std::optional<ErrorCode> {
        try {
            server_handshake(*pair.server, *server.sig, *server.kem, mode, creds, cache);
        } catch (const Error& e) {
            return e.code();
        }
        return std::nullopt;
    });
    std::optional<ErrorCode> client_error;
    try {
        client_handshake(*pair.client, *client.sig, *client.kem, mode, token);
    } catch (const Error& e) {
        client_error = e.code();
        pair.client->close();
    }
    const auto s = srv.get();
    if (server_error != nullptr) *server_error = s;
    return client_error;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("pqbench-hs-" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(Framing, LengthPrefixIsBigEndian) {
    auto pair = make_memory_stream_pair();
    const Bytes payload(0x0102, 0xAB);
    write_frame(*pair.client, payload);
    std::array<std::uint8_t, 4> len{};
    pair.server->read_exact(len);
    EXPECT_EQ(len, (std::array<std::uint8_t, 4>{0, 0, 1, 2}));
    Bytes rest(payload.size());
    pair.server->read_exact(rest);
    EXPECT_EQ(rest, payload);
}

TEST(Framing, RoundTripsAndRejectsOversizeFrames) {
    auto pair = make_memory_stream_pair();
    write_frame(*pair.client, Bytes{});
    write_frame(*pair.client, Bytes{1, 2, 3});
    EXPECT_TRUE(read_frame(*pair.server).empty());
    EXPECT_EQ(read_frame(*pair.server), (Bytes{1, 2, 3}));

    const Bytes huge_len{0xFF, 0xFF, 0xFF, 0xFF};
    pair.client->write_all(huge_len);
    EXPECT_EQ(code_of([&] { read_frame(*pair.server); }), ErrorCode::HandshakeMismatch);
}

TEST(Framing, ClosedAndSilentStreams) {
    auto pair = make_memory_stream_pair({}, std::chrono::milliseconds(20));
    Bytes buf(4);
    EXPECT_EQ(code_of([&] { pair.server->read_exact(buf); }), ErrorCode::ControlTimeout);
    pair.client->write_all(Bytes{9, 9});
    pair.client->close();
    EXPECT_EQ(code_of([&] { pair.server->read_exact(buf); }), ErrorCode::StreamClosed);
}

TEST(Handshake, FirstUseSendsLengthPrefixedPublicKeyOnly) {
    const auto reg = builtin_registry();
    auto client = make_peer(reg, "ML-DSA-44", "ML-KEM-512", 1);
    auto server = make_peer(reg, "ML-DSA-44", "ML-KEM-512", 2);
    const auto creds = make_credentials(*server.sig);
    SessionCache cache;
    auto pair = make_memory_stream_pair();
    std::optional<SessionToken> token;
    EXPECT_EQ(handshake_once(pair, client, server, creds, cache, HandshakeMode::FirstUse, token), std::nullopt);
    EXPECT_EQ(pair.client_to_server_bytes(), 4u + 800u);
    // ct + certificate + signature + confirm + token, each framed
    EXPECT_EQ(pair.server_to_client_bytes(), 5u * 4 + 768 + 3988 + 2420 + 32 + 8);
}

TEST(Handshake, HundredSeedsSucceedUntamperedAndFailTampered) {
    const auto reg = builtin_registry();
    std::mt19937_64 rng(99);
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"ML-DSA-44", "ML-KEM-512"}, {"ML-DSA-65", "ML-KEM-768"}, {"FN-DSA-512", "ML-KEM-1024"}, {"RSA-2048", "P256-ECDH"}};
    int ok = 0, tampered_failed = 0;
    for (int i = 0; i < 100; ++i) {
        const auto& [sig_id, kem_id] = pairs[static_cast<std::size_t>(i) % pairs.size()];
        const auto seed = rng();
        auto client = make_peer(reg, sig_id, kem_id, seed);
        auto server = make_peer(reg, sig_id, kem_id, seed ^ 0x5555);
        const auto creds = make_credentials(*server.sig);
        SessionCache cache;
        std::optional<SessionToken> token;

        auto clean = make_memory_stream_pair();
        if (!handshake_once(clean, client, server, creds, cache, HandshakeMode::FirstUse, token)) ++ok;

        // Flip one byte inside the transcript signature frame.
        const auto& kem = *reg.find(kem_id);
        const auto& sig = *reg.find(sig_id);
        const std::uint64_t sig_start = 4 + kem.payload_bytes + 4 + certificate_size(sig) + 4;
        const std::uint64_t target = sig_start + rng() % static_cast<std::uint64_t>(sig.payload_bytes);
        auto dirty = make_memory_stream_pair([&](std::uint64_t off, std::uint8_t& b) {
            if (off == target) b ^= static_cast<std::uint8_t>(1 + rng() % 255);
        });
        if (handshake_once(dirty, client, server, creds, cache, HandshakeMode::FirstUse, token) ==
            ErrorCode::HandshakeMismatch) {
            ++tampered_failed;
        }
    }
    EXPECT_EQ(ok, 100);
    EXPECT_EQ(tampered_failed, 100);
}

TEST(Handshake, TamperedCertificateOrCiphertextFails) {
    const auto reg = builtin_registry();
    auto client = make_peer(reg, "ML-DSA-44", "ML-KEM-512", 3);
    auto server = make_peer(reg, "ML-DSA-44", "ML-KEM-512", 4);
    const auto creds = make_credentials(*server.sig);
    SessionCache cache;
    std::optional<SessionToken> token;
    for (std::uint64_t target : {std::uint64_t{4 + 5}, std::uint64_t{4 + 768 + 4 + 300}, std::uint64_t{4 + 768 + 4 + 10}}) {
        auto pair = make_memory_stream_pair([&](std::uint64_t off, std::uint8_t& b) {
            if (off == target) b ^= 0x80;
        });
        EXPECT_EQ(handshake_once(pair, client, server, creds, cache, HandshakeMode::FirstUse, token),
                  ErrorCode::HandshakeMismatch)
            << "offset " << target;
    }
}

TEST(Handshake, SessionReuseSkipsSignatureWork) {
    const auto reg = builtin_registry();
    auto client = make_peer(reg, "ML-DSA-44", "ML-KEM-512", 5);
    auto server = make_peer(reg, "ML-DSA-44", "ML-KEM-512", 6);
    const auto creds = make_credentials(*server.sig);
    SessionCache cache;
    std::optional<SessionToken> token;

    // First reuse-mode connection has no token and runs a full handshake.
    auto first = make_memory_stream_pair();
    ASSERT_EQ(handshake_once(first, client, server, creds, cache, HandshakeMode::SessionReuse, token), std::nullopt);
    ASSERT_TRUE(token.has_value());
    EXPECT_TRUE(cache.contains(*token));
    EXPECT_EQ(first.client_to_server_bytes(), 4u + 0 + 4 + 800);

    auto resumed = make_memory_stream_pair();
    ASSERT_EQ(handshake_once(resumed, client, server, creds, cache, HandshakeMode::SessionReuse, token), std::nullopt);
    EXPECT_EQ(resumed.client_to_server_bytes(), 4u + 8 + 4 + 800);
    // accept byte, ct, confirm: no certificate and no signature
    EXPECT_EQ(resumed.server_to_client_bytes(), 4u + 1 + 4 + 768 + 4 + 32);
}

TEST(Handshake, UnknownTokenIsRejected) {
    const auto reg = builtin_registry();
    auto client = make_peer(reg, "ML-DSA-44", "ML-KEM-512", 7);
    auto server = make_peer(reg, "ML-DSA-44", "ML-KEM-512", 8);
    const auto creds = make_credentials(*server.sig);
    SessionCache cache;
    std::optional<SessionToken> token = SessionToken{1, 2, 3, 4, 5, 6, 7, 8};
    auto pair = make_memory_stream_pair();
    std::optional<ErrorCode> server_error;
    EXPECT_EQ(handshake_once(pair, client, server, creds, cache, HandshakeMode::SessionReuse, token, &server_error),
              ErrorCode::HandshakeMismatch);
    EXPECT_EQ(server_error, ErrorCode::HandshakeMismatch);
}

TEST(Handshake, MismatchedAlgorithmsFail) {
    const auto reg = builtin_registry();
    auto client = make_peer(reg, "ML-DSA-44", "ML-KEM-768", 9);
    auto server = make_peer(reg, "ML-DSA-44", "ML-KEM-512", 9);
    const auto creds = make_credentials(*server.sig);
    SessionCache cache;
    std::optional<SessionToken> token;
    auto pair = make_memory_stream_pair({}, std::chrono::milliseconds(500));
    std::optional<ErrorCode> server_error;
    handshake_once(pair, client, server, creds, cache, HandshakeMode::FirstUse, token, &server_error);
    EXPECT_EQ(server_error, ErrorCode::HandshakeMismatch);
}

TEST(Credentials, CertificateSizeIsKeyPlusSignaturePlusHeader) {
    const auto reg = builtin_registry();
    EXPECT_EQ(certificate_size(*reg.find("ML-DSA-44")), 1312 + 2420 + 256);
    auto sig = mock_sig(*reg.find("ML-DSA-44"), 42, MockCostProfile::uniform(0));
    const auto creds = make_credentials(*sig);
    EXPECT_EQ(creds.certificate.size(), 3988u);
    EXPECT_EQ(creds.secret_key.size(), static_cast<std::size_t>(reg.find("ML-DSA-44")->private_key_bytes));
    const auto pk = certificate_public_key(*sig, creds.certificate);
    EXPECT_EQ(pk.size(), 1312u);

    auto bad = creds.certificate;
    bad[kCertificateHeaderBytes + 7] ^= 1;
    EXPECT_EQ(code_of([&] { certificate_public_key(*sig, bad); }), ErrorCode::HandshakeMismatch);
    bad = creds.certificate;
    bad.pop_back();
    EXPECT_EQ(code_of([&] { certificate_public_key(*sig, bad); }), ErrorCode::HandshakeMismatch);
}

TEST(Credentials, GeneratesEverySignatureSchemeDeterministically) {
    const auto reg = builtin_registry();
    TempDir a, b;
    const auto manifest = generate_credentials(reg, a.path);
    generate_credentials(reg, b.path);

    std::size_t sigs = 0;
    for (const auto& d : reg) {
        if (d.family != Family::Signature) continue;
        ++sigs;
        const auto* e = manifest.find(d.id);
        ASSERT_NE(e, nullptr) << d.id;
        EXPECT_EQ(e->certificate_bytes, d.public_key_bytes + d.payload_bytes + 256);
        EXPECT_EQ(static_cast<std::int64_t>(fs::file_size(e->certificate_file)), e->certificate_bytes);
        EXPECT_EQ(static_cast<std::int64_t>(fs::file_size(e->key_file)), d.private_key_bytes);
        EXPECT_EQ(read_text_file(e->certificate_file), read_text_file(b.path / e->certificate_file.filename()));
    }
    EXPECT_EQ(manifest.entries.size(), sigs);
    EXPECT_EQ(manifest.find("ML-KEM-512"), nullptr);
    EXPECT_EQ(load_manifest(a.path), manifest);

    const auto* e = manifest.find("ML-DSA-44");
    const auto creds = load_credentials(*e);
    auto sig = mock_sig(*reg.find("ML-DSA-44"), 1, MockCostProfile::uniform(0));
    EXPECT_EQ(certificate_public_key(*sig, creds.certificate).size(), 1312u);
}

TEST(Credentials, EmptyRegistryGivesEmptyManifest) {
    TempDir dir;
    const auto manifest = generate_credentials(Registry{}, dir.path);
    EXPECT_TRUE(manifest.entries.empty());
    EXPECT_TRUE(load_manifest(dir.path).entries.empty());
}

TEST(Credentials, UnwritableDirectoryIsIoError) {
    TempDir dir;
    const auto blocker = dir.path / "file";
    std::ofstream(blocker) << "x";
    EXPECT_EQ(code_of([&] { generate_credentials(builtin_registry(), blocker / "sub"); }), ErrorCode::IoError);
}

TEST(Credentials, TruncatedCertificateIsRejectedOnLoad) {
    TempDir dir;
    const auto manifest = generate_credentials(builtin_registry(), dir.path);
    const auto* e = manifest.find("ML-DSA-44");
    fs::resize_file(e->certificate_file, 100);
    EXPECT_EQ(code_of([&] { load_credentials(*e); }), ErrorCode::InvalidConfig);
    write_text_file(dir.path / "manifest.json", "{ not json");
    EXPECT_EQ(code_of([&] { load_manifest(dir.path); }), ErrorCode::InvalidConfig);
}
