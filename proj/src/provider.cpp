// SPDX-License-Identifier: Apache-2.0

#include "pqbench/provider.hpp"

#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <stdexcept>

#if defined(__x86_64__) || defined(__i386__)
#include <x86intrin.h>
#endif

extern char** environ;

namespace pqbench {

std::uint64_t ClockCycleCounter::read() {
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                        std::chrono::steady_clock::now().time_since_epoch())
                        .count();
    return static_cast<std::uint64_t>(static_cast<double>(ns) * ghz_);
}

#if defined(__x86_64__) || defined(__i386__)
std::uint64_t TscCycleCounter::read() {
    unsigned aux = 0;
    return __rdtscp(&aux);
}
#endif

std::unique_ptr<CycleCounter> make_default_cycle_counter(double nominal_ghz) {
#if defined(__x86_64__) || defined(__i386__)
    (void)nominal_ghz;
    return std::make_unique<TscCycleCounter>();
#else
    return std::make_unique<ClockCycleCounter>(nominal_ghz);
#endif
}

MockCostProfile MockCostProfile::for_descriptor(const AlgorithmDescriptor& d, double scale) {
    const auto pk = d.public_key_bytes;
    const auto sk = d.private_key_bytes;
    const auto payload = d.payload_bytes;
    // Bytes each operation touches: generate keys, produce payload, consume payload.
    const std::array<std::int64_t, 3> touched = {pk + sk, (d.family == Family::Kem ? pk : sk) + payload,
                                                 (d.family == Family::Kem ? sk : pk) + payload};
    MockCostProfile p;
    for (std::size_t i = 0; i < 3; ++i) {
        p.work_units[i] = static_cast<std::uint64_t>(scale * static_cast<double>(1000 + 8 * touched[i]));
    }
    return p;
}

// ---------------------------------------------------------------------------

namespace mock {
namespace {

constexpr std::array<std::uint64_t, 4> kLaneKeys = {0x9E3779B97F4A7C15ull, 0xC2B2AE3D27D4EB4Full,
                                                    0x165667B19E3779F9ull, 0xD6E8FEB86659FD93ull};

constexpr std::uint64_t fmix(std::uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

class Hasher {
public:
    explicit Hasher(std::string_view domain) {
        for (std::size_t i = 0; i < lanes_.size(); ++i) lanes_[i] = fmix(kLaneKeys[i] + i);
        absorb_part({reinterpret_cast<const std::uint8_t*>(domain.data()), domain.size()});
    }

    // Parts are length-prefixed so ("ab","c") and ("a","bc") differ.
    void absorb_part(ByteView part) {
        absorb_word(part.size());
        std::size_t i = 0;
        for (; i + 8 <= part.size(); i += 8) {
            std::uint64_t w = 0;
            std::memcpy(&w, part.data() + i, 8);
            absorb_word(w);
        }
        if (i < part.size()) {
            std::uint64_t w = 0;
            std::memcpy(&w, part.data() + i, part.size() - i);
            absorb_word(w ^ 0x80ull << 56);
        }
    }

    std::array<std::uint8_t, 32> finish() {
        for (int round = 0; round < 2; ++round) {
            std::array<std::uint64_t, 4> next{};
            for (std::size_t i = 0; i < 4; ++i) {
                next[i] = fmix(lanes_[i] ^ std::rotl(lanes_[(i + 1) % 4], 17) ^ kLaneKeys[i]);
            }
            lanes_ = next;
        }
        std::array<std::uint8_t, 32> out{};
        std::memcpy(out.data(), lanes_.data(), out.size());
        return out;
    }

private:
    void absorb_word(std::uint64_t w) noexcept {
        for (std::size_t i = 0; i < lanes_.size(); ++i) {
            lanes_[i] = std::rotl(lanes_[i] ^ (w * kLaneKeys[i]), 27 + static_cast<int>(i)) * 0x9FB21C651E98DF25ull +
                        kLaneKeys[(i + 1) % 4];
        }
    }

    std::array<std::uint64_t, 4> lanes_{};
};

}  // namespace

std::uint64_t burn(std::uint64_t acc, std::uint64_t units) noexcept {
    for (std::uint64_t i = 0; i < units; ++i) {
        acc ^= acc >> 31;
        acc *= 0x9E3779B97F4A7C15ull;
        acc = std::rotl(acc, 23) + i;
    }
    return acc;
}

std::array<std::uint8_t, 32> digest(std::string_view domain, std::initializer_list<ByteView> parts) {
    Hasher h(domain);
    for (auto p : parts) h.absorb_part(p);
    return h.finish();
}

Bytes expand(const std::array<std::uint8_t, 32>& seed, std::string_view domain, std::size_t length) {
    const auto key = digest(domain, {ByteView(seed)});
    std::array<std::uint64_t, 4> s{};
    std::memcpy(s.data(), key.data(), key.size());
    Bytes out(length);
    std::size_t pos = 0;
    for (std::uint64_t block = 0; pos < length; ++block) {
        const std::uint64_t w = fmix(s[block % 4] + (block / 4 + 1) * kLaneKeys[0]) ^ s[(block + 1) % 4];
        const auto n = std::min<std::size_t>(8, length - pos);
        std::memcpy(out.data() + pos, &w, n);
        pos += n;
    }
    return out;
}

}  // namespace mock

// ---------------------------------------------------------------------------

namespace {

ByteView as_bytes(std::string_view s) { return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}; }

std::array<std::uint8_t, 32> to_seed(ByteView bytes) {
    return mock::digest("seed", {bytes});
}

/// Generator state, cost charging and key derivation shared by both mocks.
class MockCore {
public:
    MockCore(const AlgorithmDescriptor& d, std::uint64_t seed, const MockCostProfile& profile, VirtualTimebase* tb)
        : descriptor_(d), profile_(profile), timebase_(tb) {
        const auto id_digest = mock::digest("provider", {as_bytes(d.id)});
        std::uint64_t id_word = 0;
        std::memcpy(&id_word, id_digest.data(), sizeof id_word);
        state_ = seed ^ id_word;
    }

    const AlgorithmDescriptor& descriptor() const noexcept { return descriptor_; }

    std::uint64_t next() noexcept {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    Bytes random_bytes(std::size_t n) {
        Bytes out(n);
        for (std::size_t i = 0; i < n; i += 8) {
            const auto w = next();
            std::memcpy(out.data() + i, &w, std::min<std::size_t>(8, n - i));
        }
        return out;
    }

    void charge(Operation op) noexcept {
        state_ ^= mock::burn(state_, profile_.work(op));
        if (timebase_ != nullptr) timebase_->advance_cycles(profile_.nominal_cycles(op));
    }

    // Secret keys start with the key seed; the public key is derived from it.
    std::size_t seed_len() const noexcept {
        return std::min<std::size_t>(32, static_cast<std::size_t>(descriptor_.private_key_bytes));
    }

    Bytes public_key_from_secret(ByteView sk) const {
        return mock::expand(to_seed(sk.first(seed_len())), "pk", static_cast<std::size_t>(descriptor_.public_key_bytes));
    }

    std::pair<Bytes, Bytes> make_keypair() {
        Bytes sk = random_bytes(seed_len());
        const auto pad = mock::expand(to_seed(sk), "sk-pad", static_cast<std::size_t>(descriptor_.private_key_bytes) - sk.size());
        sk.insert(sk.end(), pad.begin(), pad.end());
        Bytes pk = public_key_from_secret(sk);
        return {std::move(pk), std::move(sk)};
    }

    void expect_size(ByteView v, std::int64_t expected, const char* what) const {
        if (static_cast<std::int64_t>(v.size()) != expected) {
            throw std::invalid_argument(descriptor_.id + ": " + what + " has " + std::to_string(v.size()) +
                                        " bytes, expected " + std::to_string(expected));
        }
    }

private:
    AlgorithmDescriptor descriptor_;
    MockCostProfile profile_;
    VirtualTimebase* timebase_;
    std::uint64_t state_ = 0;
};

class MockKem final : public KemProvider {
public:
    MockKem(const AlgorithmDescriptor& d, std::uint64_t seed, const MockCostProfile& p, VirtualTimebase* tb)
        : core_(d, seed, p, tb) {}

    const AlgorithmDescriptor& descriptor() const noexcept override { return core_.descriptor(); }

    KemKeyPair keygen() override {
        core_.charge(Operation::Keygen);
        auto [pk, sk] = core_.make_keypair();
        return {std::move(pk), std::move(sk)};
    }

    // ct = (r ^ mask(pk)) || body(pk, r); ss = H(pk, r). Decapsulation
    // recomputes the body and falls back to an implicit-rejection secret.
    Encapsulation encaps(ByteView pk) override {
        core_.expect_size(pk, descriptor().public_key_bytes, "public key");
        core_.charge(Operation::Encaps);
        const Bytes r = core_.random_bytes(nonce_len());
        Encapsulation out;
        out.ciphertext = build_ciphertext(pk, r);
        out.shared_secret = shared_secret(pk, r);
        return out;
    }

    Bytes decaps(ByteView sk, ByteView ct) override {
        core_.expect_size(sk, descriptor().private_key_bytes, "secret key");
        core_.expect_size(ct, descriptor().payload_bytes, "ciphertext");
        core_.charge(Operation::Decaps);
        const Bytes pk = core_.public_key_from_secret(sk);
        const Bytes mask = mock::expand(to_seed(pk), "mask", nonce_len());
        Bytes r(ct.begin(), ct.begin() + static_cast<std::ptrdiff_t>(nonce_len()));
        for (std::size_t i = 0; i < r.size(); ++i) r[i] ^= mask[i];
        if (build_ciphertext(pk, r) == Bytes(ct.begin(), ct.end())) return shared_secret(pk, r);
        const auto reject = mock::digest("reject", {sk, ct});
        return {reject.begin(), reject.end()};
    }

private:
    std::size_t nonce_len() const noexcept {
        return std::min<std::size_t>(32, static_cast<std::size_t>(descriptor().payload_bytes));
    }

    Bytes build_ciphertext(ByteView pk, ByteView r) const {
        const Bytes mask = mock::expand(to_seed(pk), "mask", r.size());
        Bytes ct(r.begin(), r.end());
        for (std::size_t i = 0; i < ct.size(); ++i) ct[i] ^= mask[i];
        const auto body = mock::expand(mock::digest("body", {pk, r}), "ct-body",
                                       static_cast<std::size_t>(descriptor().payload_bytes) - r.size());
        ct.insert(ct.end(), body.begin(), body.end());
        return ct;
    }

    static Bytes shared_secret(ByteView pk, ByteView r) {
        const auto ss = mock::digest("ss", {pk, r});
        static_assert(std::tuple_size_v<decltype(ss)> == kMockSharedSecretBytes);
        return {ss.begin(), ss.end()};
    }

    MockCore core_;
};

class MockSig final : public SigProvider {
public:
    MockSig(const AlgorithmDescriptor& d, std::uint64_t seed, const MockCostProfile& p, VirtualTimebase* tb)
        : core_(d, seed, p, tb) {}

    const AlgorithmDescriptor& descriptor() const noexcept override { return core_.descriptor(); }

    SigKeyPair keypair() override {
        core_.charge(Operation::Keypair);
        auto [pk, sk] = core_.make_keypair();
        return {std::move(pk), std::move(sk)};
    }

    Bytes sign(ByteView sk, ByteView message) override {
        core_.expect_size(sk, descriptor().private_key_bytes, "secret key");
        core_.charge(Operation::Sign);
        return signature_for(core_.public_key_from_secret(sk), message);
    }

    bool verify(ByteView pk, ByteView message, ByteView signature) override {
        core_.charge(Operation::Verify);
        if (static_cast<std::int64_t>(pk.size()) != descriptor().public_key_bytes ||
            static_cast<std::int64_t>(signature.size()) != descriptor().payload_bytes) {
            return false;
        }
        const Bytes expected = signature_for(pk, message);
        return std::equal(expected.begin(), expected.end(), signature.begin(), signature.end());
    }

private:
    Bytes signature_for(ByteView pk, ByteView message) const {
        return mock::expand(mock::digest("sig", {pk, message}), "sig",
                            static_cast<std::size_t>(descriptor().payload_bytes));
    }

    MockCore core_;
};

}  // namespace

std::unique_ptr<KemProvider> mock_kem(const AlgorithmDescriptor& descriptor, std::uint64_t seed,
                                      const MockCostProfile& profile, VirtualTimebase* timebase) {
    if (descriptor.family != Family::Kem) {
        throw Error(ErrorCode::WrongFamily, descriptor.id + " is not a KEM");
    }
    descriptor.validate();
    return std::make_unique<MockKem>(descriptor, seed, profile, timebase);
}

std::unique_ptr<SigProvider> mock_sig(const AlgorithmDescriptor& descriptor, std::uint64_t seed,
                                      const MockCostProfile& profile, VirtualTimebase* timebase) {
    if (descriptor.family != Family::Signature) {
        throw Error(ErrorCode::WrongFamily, descriptor.id + " is not a signature scheme");
    }
    descriptor.validate();
    return std::make_unique<MockSig>(descriptor, seed, profile, timebase);
}

// ---------------------------------------------------------------------------
// External process adapter

std::string_view to_string(OutputKind kind) noexcept {
    switch (kind) {
        case OutputKind::LiboqsSpeed: return "LIBOQS_SPEED";
        case OutputKind::OpensslSpeed: return "OPENSSL_SPEED";
        case OutputKind::STime: return "S_TIME";
    }
    return "?";
}

std::vector<std::string> expand_command_template(std::string_view command_template, const CommandSubstitutions& subs) {
    const std::pair<std::string_view, const std::string*> placeholders[] = {
        {"{alg}", &subs.alg}, {"{window}", &subs.window}, {"{out}", &subs.out}, {"{op}", &subs.op}};

    std::vector<std::string> argv;
    std::size_t pos = 0;
    while (pos < command_template.size()) {
        while (pos < command_template.size() && std::isspace(static_cast<unsigned char>(command_template[pos]))) ++pos;
        const auto start = pos;
        while (pos < command_template.size() && !std::isspace(static_cast<unsigned char>(command_template[pos]))) ++pos;
        if (start == pos) break;

        const auto token = command_template.substr(start, pos - start);
        std::string arg;
        for (std::size_t i = 0; i < token.size();) {
            bool replaced = false;
            for (const auto& [name, value] : placeholders) {
                if (token.substr(i, name.size()) == name) {
                    arg += *value;
                    i += name.size();
                    replaced = true;
                    break;
                }
            }
            if (!replaced) arg += token[i++];
        }
        argv.push_back(std::move(arg));
    }
    return argv;
}

namespace {

struct Pipe {
    int fds[2] = {-1, -1};
    Pipe() {
        if (::pipe(fds) != 0) throw ProcessError(ErrorCode::SpawnFailed, "pipe() failed", -1, std::strerror(errno));
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    Pipe(const Pipe&) = delete;
    Pipe& operator=(const Pipe&) = delete;
    void close_read() {
        if (fds[0] >= 0) ::close(fds[0]);
        fds[0] = -1;
    }
    void close_write() {
        if (fds[1] >= 0) ::close(fds[1]);
        fds[1] = -1;
    }
};

class SpawnActions {
public:
    SpawnActions() { posix_spawn_file_actions_init(&actions_); }
    ~SpawnActions() { posix_spawn_file_actions_destroy(&actions_); }
    SpawnActions(const SpawnActions&) = delete;
    SpawnActions& operator=(const SpawnActions&) = delete;
    posix_spawn_file_actions_t* get() { return &actions_; }

private:
    posix_spawn_file_actions_t actions_;
};

}  // namespace

CommandCapture run_command(const std::vector<std::string>& argv, OutputKind kind) {
    if (argv.empty()) throw ProcessError(ErrorCode::SpawnFailed, "empty command", -1, "");

    Pipe out_pipe;
    Pipe err_pipe;
    SpawnActions actions;
    posix_spawn_file_actions_adddup2(actions.get(), out_pipe.fds[1], STDOUT_FILENO);
    posix_spawn_file_actions_adddup2(actions.get(), err_pipe.fds[1], STDERR_FILENO);
    posix_spawn_file_actions_addclose(actions.get(), out_pipe.fds[0]);
    posix_spawn_file_actions_addclose(actions.get(), err_pipe.fds[0]);

    std::vector<char*> cargv;
    cargv.reserve(argv.size() + 1);
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);

    pid_t pid = 0;
    const int rc = ::posix_spawnp(&pid, cargv[0], actions.get(), nullptr, cargv.data(), environ);
    if (rc != 0) {
        throw ProcessError(ErrorCode::SpawnFailed, "cannot start '" + argv[0] + "': " + std::strerror(rc), -1,
                           std::strerror(rc));
    }
    out_pipe.close_write();
    err_pipe.close_write();

    CommandCapture capture;
    capture.kind = kind;
    pollfd fds[2] = {{out_pipe.fds[0], POLLIN, 0}, {err_pipe.fds[0], POLLIN, 0}};
    std::string* sinks[2] = {&capture.stdout_text, &capture.stderr_text};
    int open_streams = 2;
    char buf[4096];
    while (open_streams > 0) {
        if (::poll(fds, 2, -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || fds[i].revents == 0) continue;
            const auto n = ::read(fds[i].fd, buf, sizeof buf);
            if (n > 0) {
                sinks[i]->append(buf, static_cast<std::size_t>(n));
            } else if (n == 0 || errno != EINTR) {
                fds[i].fd = -1;
                --open_streams;
            }
        }
    }

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFEXITED(status)) {
        capture.exit_status = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        capture.exit_status = 128 + WTERMSIG(status);
    }
    if (capture.exit_status != 0) {
        throw ProcessError(ErrorCode::NonzeroExit,
                           "'" + argv[0] + "' exited with status " + std::to_string(capture.exit_status),
                           capture.exit_status, capture.stderr_text);
    }
    return capture;
}

CommandCapture external_adapter(std::string_view command_template, OutputKind kind, const CommandSubstitutions& subs) {
    return run_command(expand_command_template(command_template, subs), kind);
}

}  // namespace pqbench
