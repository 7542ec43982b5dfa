// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pqbench/model.hpp"

namespace pqbench {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

struct KemKeyPair {
    Bytes public_key;
    Bytes secret_key;
};

struct Encapsulation {
    Bytes ciphertext;
    Bytes shared_secret;
};

struct SigKeyPair {
    Bytes public_key;
    Bytes secret_key;
};

class KemProvider {
public:
    virtual ~KemProvider() = default;
    virtual const AlgorithmDescriptor& descriptor() const noexcept = 0;
    virtual KemKeyPair keygen() = 0;
    virtual Encapsulation encaps(ByteView public_key) = 0;
    virtual Bytes decaps(ByteView secret_key, ByteView ciphertext) = 0;
};

class SigProvider {
public:
    virtual ~SigProvider() = default;
    virtual const AlgorithmDescriptor& descriptor() const noexcept = 0;
    virtual SigKeyPair keypair() = 0;
    virtual Bytes sign(ByteView secret_key, ByteView message) = 0;
    virtual bool verify(ByteView public_key, ByteView message, ByteView signature) = 0;
};

// ---------------------------------------------------------------------------
// Time sources

/// Monotonic cycle source. Reads are per-thread and never decrease.
class CycleCounter {
public:
    virtual ~CycleCounter() = default;
    virtual std::uint64_t read() = 0;
};

/// Monotonic wall-time source used by the fixed-window loops.
class WallClock {
public:
    virtual ~WallClock() = default;
    virtual std::chrono::nanoseconds now() = 0;
};

class SteadyWallClock final : public WallClock {
public:
    std::chrono::nanoseconds now() override {
        return std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch());
    }
};

/// Nanosecond monotonic clock scaled by a nominal frequency.
class ClockCycleCounter final : public CycleCounter {
public:
    explicit ClockCycleCounter(double nominal_ghz = 1.0) : ghz_(nominal_ghz) {}
    std::uint64_t read() override;

private:
    double ghz_;
};

#if defined(__x86_64__) || defined(__i386__)
/// Hardware timestamp counter.
class TscCycleCounter final : public CycleCounter {
public:
    std::uint64_t read() override;
};
#endif

/// Timestamp counter when the target has one, otherwise ClockCycleCounter.
std::unique_ptr<CycleCounter> make_default_cycle_counter(double nominal_ghz = 1.0);

/// Simulated time that only moves when a mock provider charges it for work.
/// Makes mock benchmark runs fully reproducible.
class VirtualTimebase final : public WallClock, public CycleCounter {
public:
    explicit VirtualTimebase(double nominal_ghz = 1.0) : ghz_(nominal_ghz) {}

    void advance_cycles(double cycles) noexcept { cycles_ += cycles; }
    std::chrono::nanoseconds now() override {
        return std::chrono::nanoseconds(static_cast<std::int64_t>(cycles_ / ghz_));
    }
    std::uint64_t read() override { return static_cast<std::uint64_t>(cycles_); }

private:
    double ghz_;
    double cycles_ = 0.0;
};

// ---------------------------------------------------------------------------
// Deterministic mock provider

/// Per-operation cost of the mock providers, indexed by operation_index().
struct MockCostProfile {
    std::array<std::uint64_t, 3> work_units{};
    std::array<double, 3> nominal_cycles_per_unit{1.0, 1.0, 1.0};

    std::uint64_t work(Operation op) const noexcept { return work_units[operation_index(op)]; }
    double nominal_cycles(Operation op) const noexcept {
        return static_cast<double>(work(op)) * nominal_cycles_per_unit[operation_index(op)];
    }

    static MockCostProfile uniform(std::uint64_t units) { return {{units, units, units}, {1.0, 1.0, 1.0}}; }

    /// Cost that grows with the bytes an operation touches, so larger
    /// parameter sets are slower. `scale` multiplies every operation.
    static MockCostProfile for_descriptor(const AlgorithmDescriptor& d, double scale = 1.0);
};

namespace mock {

/// Multiply-xor-rotate chain over a 64-bit accumulator; `units` dependent
/// steps. The result feeds the provider's generator state so it cannot be
/// discarded.
std::uint64_t burn(std::uint64_t acc, std::uint64_t units) noexcept;

/// 32-byte keyed digest over the concatenation of `parts`.
std::array<std::uint8_t, 32> digest(std::string_view domain, std::initializer_list<ByteView> parts);

/// Deterministic byte stream of `length` bytes derived from a digest.
Bytes expand(const std::array<std::uint8_t, 32>& seed, std::string_view domain, std::size_t length);

}  // namespace mock

/// Shared-secret length of the mock KEM.
inline constexpr std::size_t kMockSharedSecretBytes = 32;

/// Throws WRONG_FAMILY unless `descriptor` is a KEM. When `timebase` is set,
/// each operation also charges its nominal cycles to it.
std::unique_ptr<KemProvider> mock_kem(const AlgorithmDescriptor& descriptor, std::uint64_t seed,
                                      const MockCostProfile& profile, VirtualTimebase* timebase = nullptr);

/// Throws WRONG_FAMILY unless `descriptor` is a signature scheme.
std::unique_ptr<SigProvider> mock_sig(const AlgorithmDescriptor& descriptor, std::uint64_t seed,
                                      const MockCostProfile& profile, VirtualTimebase* timebase = nullptr);

// ---------------------------------------------------------------------------
// External process adapter

enum class OutputKind { LiboqsSpeed, OpensslSpeed, STime };

std::string_view to_string(OutputKind kind) noexcept;

/// Values for the `{alg}`, `{window}`, `{out}` and `{op}` placeholders.
struct CommandSubstitutions {
    std::string alg;
    std::string window;
    std::string out;
    std::string op;
};

struct CommandCapture {
    OutputKind kind = OutputKind::LiboqsSpeed;
    std::string stdout_text;
    std::string stderr_text;
    int exit_status = 0;
};

/// Splits the template on whitespace and substitutes placeholders inside each
/// argument verbatim. Substituted values never create new arguments.
std::vector<std::string> expand_command_template(std::string_view command_template, const CommandSubstitutions& subs);

/// Runs argv[0] (PATH lookup, no shell) and captures both output streams.
/// Throws ProcessError with SPAWN_FAILED or NONZERO_EXIT.
CommandCapture run_command(const std::vector<std::string>& argv, OutputKind kind = OutputKind::LiboqsSpeed);

/// expand_command_template + run_command. Does not interpret the output.
CommandCapture external_adapter(std::string_view command_template, OutputKind kind, const CommandSubstitutions& subs);

}  // namespace pqbench
