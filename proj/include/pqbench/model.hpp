// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pqbench/error.hpp"

namespace pqbench {

enum class Family { Kem, Signature };

enum class Operation { Keygen, Encaps, Decaps, Keypair, Sign, Verify };

enum class SecurityLevel : int { Unknown = 0, L1 = 1, L3 = 3, L5 = 5 };

enum class Capability : std::uint8_t {
    CpuBench = 1u << 0,
    MemBench = 1u << 1,
    Handshake = 1u << 2,
    Speed = 1u << 3,
};

enum class HandshakeMode { FirstUse, SessionReuse };

enum class Role { Server, Client, Standalone };

std::string_view to_string(Family family) noexcept;
std::string_view to_string(Operation op) noexcept;  // lower-case label, "keygen"
std::string_view to_string(Capability cap) noexcept;
std::string_view to_string(HandshakeMode mode) noexcept;  // "first" / "reuse"
std::string_view to_string(Role role) noexcept;

std::optional<Family> parse_family(std::string_view text) noexcept;
/// Case-insensitive; accepts the liboqs/openssl labels ("keypair", "keygens", "signs").
std::optional<Operation> parse_operation(std::string_view text) noexcept;
std::optional<Capability> parse_capability(std::string_view text) noexcept;
std::optional<HandshakeMode> parse_handshake_mode(std::string_view text) noexcept;
std::optional<Role> parse_role(std::string_view text) noexcept;

constexpr std::array<Operation, 3> operations_for(Family family) noexcept {
    if (family == Family::Kem) {
        return {Operation::Keygen, Operation::Encaps, Operation::Decaps};
    }
    return {Operation::Keypair, Operation::Sign, Operation::Verify};
}

constexpr Family family_of(Operation op) noexcept {
    switch (op) {
        case Operation::Keygen:
        case Operation::Encaps:
        case Operation::Decaps:
            return Family::Kem;
        default:
            return Family::Signature;
    }
}

/// Position of the operation within its family's triple (0, 1 or 2).
constexpr int operation_index(Operation op) noexcept {
    switch (op) {
        case Operation::Keygen:
        case Operation::Keypair:
            return 0;
        case Operation::Encaps:
        case Operation::Sign:
            return 1;
        default:
            return 2;
    }
}

class CapabilitySet {
public:
    constexpr CapabilitySet() = default;
    constexpr CapabilitySet(std::initializer_list<Capability> caps) {
        for (auto c : caps) set(c);
    }

    static constexpr CapabilitySet all() {
        return {Capability::CpuBench, Capability::MemBench, Capability::Handshake, Capability::Speed};
    }

    constexpr bool has(Capability c) const noexcept { return (bits_ & static_cast<std::uint8_t>(c)) != 0; }
    constexpr void set(Capability c) noexcept { bits_ |= static_cast<std::uint8_t>(c); }
    constexpr void clear(Capability c) noexcept { bits_ &= static_cast<std::uint8_t>(~static_cast<std::uint8_t>(c)); }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    constexpr std::uint8_t bits() const noexcept { return bits_; }

    friend constexpr bool operator==(CapabilitySet, CapabilitySet) = default;

private:
    std::uint8_t bits_ = 0;
};

inline constexpr std::array<Capability, 4> kAllCapabilities = {
    Capability::CpuBench, Capability::MemBench, Capability::Handshake, Capability::Speed};

/// Identity and artifact sizes of one KEM or signature scheme.
///
/// `payload_bytes` is the ciphertext size for a KEM and the signature size for
/// a signature scheme. Capabilities model per-algorithm exclusions: an
/// algorithm without `Handshake` never enters a handshake plan, one without
/// `MemBench` is skipped by memory profiling, and so on.
struct AlgorithmDescriptor {
    std::string id;
    Family family = Family::Kem;
    SecurityLevel security_level = SecurityLevel::Unknown;
    std::int64_t public_key_bytes = 0;
    std::int64_t private_key_bytes = 0;
    std::int64_t payload_bytes = 0;
    bool standardised = false;
    bool hybrid = false;
    CapabilitySet capabilities;

    /// Throws MALFORMED_REGISTRY on an empty/unsafe id or a non-positive size.
    void validate() const;

    friend bool operator==(const AlgorithmDescriptor&, const AlgorithmDescriptor&) = default;
};

/// Ordered, id-unique set of descriptors plus the alias table that maps an
/// algorithm id to its base scheme (used to pair standardised and
/// non-standardised variants of the same scheme).
class Registry {
public:
    Registry() = default;
    /// Throws MALFORMED_REGISTRY on duplicate ids or invalid descriptors.
    explicit Registry(std::vector<AlgorithmDescriptor> algorithms, std::map<std::string, std::string> aliases = {});

    const std::vector<AlgorithmDescriptor>& algorithms() const noexcept { return algorithms_; }
    const std::map<std::string, std::string>& aliases() const noexcept { return aliases_; }

    /// Exact match first, then a match that treats ' ' and '-' as equal
    /// ("FN-DSA 512" finds "FN-DSA-512").
    const AlgorithmDescriptor* find(std::string_view id) const noexcept;
    const AlgorithmDescriptor& at(std::string_view id) const;

    /// Base scheme of `id` from the alias table, or nullopt when not aliased.
    std::optional<std::string> base_scheme(std::string_view id) const;

    std::vector<AlgorithmDescriptor> with_capability(Capability cap) const;

    /// Grants every capability to `id`. Throws MALFORMED_REGISTRY for unknown ids.
    void enable(std::string_view id);

    std::size_t size() const noexcept { return algorithms_.size(); }
    bool empty() const noexcept { return algorithms_.empty(); }
    auto begin() const noexcept { return algorithms_.begin(); }
    auto end() const noexcept { return algorithms_.end(); }

    friend bool operator==(const Registry&, const Registry&) = default;

private:
    std::vector<AlgorithmDescriptor> algorithms_;
    std::map<std::string, std::string> aliases_;
};

Registry parse_registry(std::string_view json_text);
Registry load_registry(const std::filesystem::path& path);
std::string serialize_registry(const Registry& registry);

/// Descriptors for the standardised KEM and signature schemes and the
/// classical baselines, with their published key, ciphertext and signature
/// sizes. HQC ships without capabilities (disabled upstream by default);
/// `Registry::enable` turns it on.
Registry builtin_registry();

/// True when `id` is usable as an algorithm id: non-empty and free of
/// whitespace, ',', '|', '/' and '\\'.
bool is_valid_algorithm_id(std::string_view id) noexcept;

// ---------------------------------------------------------------------------
// Run configuration

/// Keeps only [A-Za-z0-9_-].
std::string sanitize_machine_id(std::string_view raw);

struct PeerAddress {
    std::string host;
    std::uint16_t port = 0;
};

/// "host:port"; throws INVALID_CONFIG.
PeerAddress parse_peer_address(std::string_view text);

struct BenchConfig {
    std::string machine_id = "machine";
    Role role = Role::Standalone;
    std::string peer_address;
    std::uint16_t control_port = 25000;
    std::uint16_t data_port = 25001;
    int num_runs = 3;
    double cpu_window_seconds = 3.0;
    double tls_window_seconds = 30.0;
    double control_timeout_seconds = 30.0;
    int max_retries = 3;
    std::filesystem::path output_root = "test_data/up_results";

    /// Throws INVALID_CONFIG. Requires machine_id to already be sanitized.
    void validate() const;

    std::filesystem::path machine_dir() const { return output_root / machine_id; }
};

// ---------------------------------------------------------------------------
// Measurement records. `validate()` throws INVALID_RECORD and never clamps.

struct CpuOpRecord {
    std::string algorithm_id;
    Operation operation = Operation::Keygen;
    int run_index = 1;
    std::int64_t iterations = 1;
    double mean_time_us = 0.0;
    double mean_cycles = 0.0;

    /// With `window_seconds`, also checks mean_time_us * iterations against
    /// 1.5x the window.
    void validate(std::optional<double> window_seconds = std::nullopt) const;

    friend bool operator==(const CpuOpRecord&, const CpuOpRecord&) = default;
};

struct MemOpRecord {
    std::string algorithm_id;
    Operation operation = Operation::Keygen;
    int run_index = 1;
    std::int64_t heap_bytes = 0;
    std::int64_t ext_heap_bytes = 0;
    std::int64_t stack_bytes = 0;

    void validate() const;

    friend bool operator==(const MemOpRecord&, const MemOpRecord&) = default;
};

struct HandshakeRecord {
    std::string sig_algorithm_id;
    std::string kem_algorithm_id;
    HandshakeMode mode = HandshakeMode::FirstUse;
    int run_index = 1;
    std::int64_t connections = 0;
    double real_seconds = 0.0;
    double user_connections_per_sec = 0.0;

    void validate() const;

    friend bool operator==(const HandshakeRecord&, const HandshakeRecord&) = default;
};

struct SpeedRecord {
    std::string algorithm_id;
    Operation operation = Operation::Keygen;
    int run_index = 1;
    double ops_per_second = 0.0;
    double mean_op_seconds = 0.0;

    void validate() const;

    friend bool operator==(const SpeedRecord&, const SpeedRecord&) = default;
};

/// Builds a SpeedRecord from a fixed-window measurement: ops/s is
/// iterations / elapsed and the mean op time its reciprocal.
SpeedRecord make_speed_record(std::string algorithm_id, Operation op, int run_index, std::int64_t iterations,
                              double elapsed_seconds);

}  // namespace pqbench
