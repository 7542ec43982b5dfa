// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <random>

#include "pqbench/provider.hpp"

namespace pqbench {
namespace {

const AlgorithmDescriptor& alg(std::string_view id) {
    static const auto reg = builtin_registry();
    return reg.at(id);
}

const auto kCheap = MockCostProfile::uniform(10);

TEST(MockKem, RoundTripAndSizes) {
    auto kem = mock_kem(alg("ML-KEM-512"), 1, kCheap);
    const auto kp = kem->keygen();
    const auto enc = kem->encaps(kp.public_key);
    EXPECT_EQ(kp.public_key.size(), 800u);
    EXPECT_EQ(kp.secret_key.size(), 1632u);
    EXPECT_EQ(enc.ciphertext.size(), 768u);
    EXPECT_EQ(enc.shared_secret.size(), kMockSharedSecretBytes);
    EXPECT_EQ(kem->decaps(kp.secret_key, enc.ciphertext), enc.shared_secret);
}

TEST(MockKem, TamperedCiphertextChangesSecret) {
    auto kem = mock_kem(alg("ML-KEM-512"), 1, kCheap);
    const auto kp = kem->keygen();
    const auto enc = kem->encaps(kp.public_key);
    // First eight bytes, then a spread over the ciphertext body.
    std::vector<std::size_t> positions = {0, 1, 2, 3, 4, 5, 6, 7};
    for (std::size_t i = 8; i < enc.ciphertext.size(); i += 97) positions.push_back(i);
    positions.push_back(enc.ciphertext.size() - 1);
    for (auto pos : positions) {
        auto ct = enc.ciphertext;
        ct[pos] ^= 0x01;
        const auto ss = kem->decaps(kp.secret_key, ct);
        bool identical = ss.size() == enc.shared_secret.size();
        for (std::size_t b = 0; identical && b < ss.size(); ++b) identical = ss[b] == enc.shared_secret[b];
        EXPECT_FALSE(identical) << "flip at byte " << pos;
    }
}

TEST(MockKem, WrongFamilyAndSizeChecks) {
    try {
        mock_kem(alg("ML-DSA-44"), 1, kCheap);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::WrongFamily);
    }
    auto kem = mock_kem(alg("ML-KEM-768"), 1, kCheap);
    EXPECT_THROW(kem->encaps(Bytes(10)), std::invalid_argument);
}

TEST(MockKem, SmallClassicalSizes) {
    auto kem = mock_kem(alg("P256-ECDH"), 3, kCheap);
    const auto kp = kem->keygen();
    const auto enc = kem->encaps(kp.public_key);
    EXPECT_EQ(enc.ciphertext.size(), 65u);
    EXPECT_EQ(kem->decaps(kp.secret_key, enc.ciphertext), enc.shared_secret);
}

TEST(MockSig, RoundTripAndSizes) {
    auto sig = mock_sig(alg("FN-DSA-512"), 1, kCheap);
    const auto kp = sig->keypair();
    const Bytes msg = {'h', 'e', 'l', 'l', 'o'};
    const auto s = sig->sign(kp.secret_key, msg);
    EXPECT_EQ(s.size(), 690u);
    EXPECT_TRUE(sig->verify(kp.public_key, msg, s));

    const auto other = sig->keypair();
    EXPECT_FALSE(sig->verify(other.public_key, msg, s));

    try {
        mock_sig(alg("ML-KEM-512"), 1, kCheap);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::WrongFamily);
    }
}

TEST(MockSig, SingleByteMutationsFailVerification) {
    auto sig = mock_sig(alg("ML-DSA-44"), 9, kCheap);
    const auto kp = sig->keypair();
    const Bytes msg(64, 0x5a);
    const auto s = sig->sign(kp.secret_key, msg);

    auto appended = msg;
    appended.push_back(0);
    EXPECT_FALSE(sig->verify(kp.public_key, appended, s));

    std::mt19937 rng(16);
    for (int trial = 0; trial < 16; ++trial) {
        auto m = msg;
        auto t = s;
        const auto byte = static_cast<std::uint8_t>(1 + rng() % 255);
        m[rng() % m.size()] ^= byte;
        t[rng() % t.size()] ^= byte;
        EXPECT_FALSE(sig->verify(kp.public_key, m, s)) << "message mutation " << trial;
        EXPECT_FALSE(sig->verify(kp.public_key, msg, t)) << "signature mutation " << trial;
    }
}

TEST(MockProvider, DeterministicForEqualInputs) {
    const auto profile = MockCostProfile::for_descriptor(alg("ML-KEM-768"));
    auto a = mock_kem(alg("ML-KEM-768"), 42, profile);
    auto b = mock_kem(alg("ML-KEM-768"), 42, profile);
    auto c = mock_kem(alg("ML-KEM-768"), 43, profile);
    for (int i = 0; i < 5; ++i) {
        const auto ka = a->keygen();
        const auto kb = b->keygen();
        const auto kc = c->keygen();
        EXPECT_EQ(ka.public_key, kb.public_key);
        EXPECT_EQ(ka.secret_key, kb.secret_key);
        EXPECT_NE(ka.public_key, kc.public_key);
        const auto ea = a->encaps(ka.public_key);
        const auto eb = b->encaps(kb.public_key);
        EXPECT_EQ(ea.ciphertext, eb.ciphertext);
        EXPECT_EQ(a->decaps(ka.secret_key, ea.ciphertext), b->decaps(kb.secret_key, eb.ciphertext));
    }

    auto s1 = mock_sig(alg("ML-DSA-65"), 42, kCheap);
    auto s2 = mock_sig(alg("ML-DSA-65"), 42, kCheap);
    const Bytes msg = {1, 2, 3};
    const auto k1 = s1->keypair();
    const auto k2 = s2->keypair();
    EXPECT_EQ(k1.secret_key, k2.secret_key);
    EXPECT_EQ(s1->sign(k1.secret_key, msg), s2->sign(k2.secret_key, msg));
}

double best_burn_seconds(std::uint64_t units) {
    double best = 1e9;
    std::uint64_t sink = 0;
    for (int rep = 0; rep < 7; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        sink ^= mock::burn(sink + static_cast<std::uint64_t>(rep), units);
        const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
        best = std::min(best, took.count());
    }
    EXPECT_NE(sink, 0xdeadbeefull);  // keeps the result observable
    return best;
}

TEST(MockProvider, WorkScalesWithUnits) {
    for (std::uint64_t k : {100'000ull, 400'000ull}) {
        const double t1 = best_burn_seconds(k);
        const double t2 = best_burn_seconds(2 * k);
        EXPECT_GE(t2, 1.5 * t1) << "k=" << k << " t1=" << t1 << " t2=" << t2;
    }
}

TEST(MockProvider, VirtualTimebaseIsChargedNominalCycles) {
    VirtualTimebase tb(2.0);
    MockCostProfile profile{{100, 400, 50}, {1.0, 2.0, 4.0}};
    auto kem = mock_kem(alg("ML-KEM-512"), 1, profile, &tb);
    const auto kp = kem->keygen();
    EXPECT_EQ(tb.read(), 100u);
    const auto enc = kem->encaps(kp.public_key);
    EXPECT_EQ(tb.read(), 900u);
    kem->decaps(kp.secret_key, enc.ciphertext);
    EXPECT_EQ(tb.read(), 1100u);
    EXPECT_EQ(tb.now(), std::chrono::nanoseconds(550));
}

TEST(CycleCounter, MonotonicUnderRepeatedReads) {
    std::vector<std::unique_ptr<CycleCounter>> counters;
    counters.push_back(make_default_cycle_counter());
    counters.push_back(std::make_unique<ClockCycleCounter>(1.0));
    for (auto& counter : counters) {
        auto prev = counter->read();
        for (int i = 0; i < 10'000; ++i) {
            const auto now = counter->read();
            ASSERT_GE(now, prev);
            prev = now;
        }
    }
}

TEST(ExternalAdapter, EchoCapturesOutput) {
    const auto cap = external_adapter("echo {alg}", OutputKind::LiboqsSpeed, {.alg = "ML-KEM-512"});
    EXPECT_EQ(cap.stdout_text, "ML-KEM-512\n");
    EXPECT_EQ(cap.exit_status, 0);
    EXPECT_EQ(cap.kind, OutputKind::LiboqsSpeed);
}

TEST(ExternalAdapter, PlaceholdersAreSubstitutedWithoutShellSplitting) {
    const auto argv = expand_command_template("speed --alg={alg} -d {window}  -o {out}/x {op}",
                                              {.alg = "A B", .window = "3", .out = "/tmp/o", .op = "keygen"});
    EXPECT_EQ(argv, (std::vector<std::string>{"speed", "--alg=A B", "-d", "3", "-o", "/tmp/o/x", "keygen"}));
}

TEST(ExternalAdapter, MissingBinaryIsSpawnFailure) {
    try {
        external_adapter("/nonexistent/pqbench-no-such-binary {alg}", OutputKind::STime, {.alg = "x"});
        FAIL();
    } catch (const ProcessError& e) {
        EXPECT_EQ(e.code(), ErrorCode::SpawnFailed);
    }
}

TEST(ExternalAdapter, NonzeroExitCarriesStatusAndStderr) {
    try {
        external_adapter("sh -c {alg}", OutputKind::OpensslSpeed, {.alg = "echo oops >&2; exit 2"});
        FAIL();
    } catch (const ProcessError& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonzeroExit);
        EXPECT_EQ(e.exit_status(), 2);
        EXPECT_EQ(e.stderr_text(), "oops\n");
    }
}

}  // namespace
}  // namespace pqbench
