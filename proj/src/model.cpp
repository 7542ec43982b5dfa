// SPDX-License-Identifier: Apache-2.0

#include "pqbench/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace pqbench {

using nlohmann::json;

namespace {

bool iequals(std::string_view a, std::string_view b) noexcept {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

bool equal_ignoring_separator(std::string_view a, std::string_view b) noexcept {
    auto norm = [](char c) { return c == ' ' ? '-' : c; };
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [&](char x, char y) { return norm(x) == norm(y); });
}

[[noreturn]] void registry_error(const std::string& what) { throw Error(ErrorCode::MalformedRegistry, what); }

[[noreturn]] void record_error(const std::string& what) { throw Error(ErrorCode::InvalidRecord, what); }

}  // namespace

std::string_view to_string(Family family) noexcept { return family == Family::Kem ? "KEM" : "SIGNATURE"; }

std::string_view to_string(Operation op) noexcept {
    switch (op) {
        case Operation::Keygen: return "keygen";
        case Operation::Encaps: return "encaps";
        case Operation::Decaps: return "decaps";
        case Operation::Keypair: return "keypair";
        case Operation::Sign: return "sign";
        case Operation::Verify: return "verify";
    }
    return "?";
}

std::string_view to_string(Capability cap) noexcept {
    switch (cap) {
        case Capability::CpuBench: return "CPU_BENCH";
        case Capability::MemBench: return "MEM_BENCH";
        case Capability::Handshake: return "HANDSHAKE";
        case Capability::Speed: return "SPEED";
    }
    return "?";
}

std::string_view to_string(HandshakeMode mode) noexcept {
    return mode == HandshakeMode::FirstUse ? "first" : "reuse";
}

std::string_view to_string(Role role) noexcept {
    switch (role) {
        case Role::Server: return "server";
        case Role::Client: return "client";
        case Role::Standalone: return "standalone";
    }
    return "?";
}

std::optional<Family> parse_family(std::string_view text) noexcept {
    if (iequals(text, "KEM")) return Family::Kem;
    if (iequals(text, "SIGNATURE") || iequals(text, "SIG")) return Family::Signature;
    return std::nullopt;
}

std::optional<Operation> parse_operation(std::string_view text) noexcept {
    static constexpr std::pair<std::string_view, Operation> kLabels[] = {
        {"keygen", Operation::Keygen},   {"keygens", Operation::Keygen}, {"encaps", Operation::Encaps},
        {"decaps", Operation::Decaps},   {"keypair", Operation::Keypair}, {"sign", Operation::Sign},
        {"signs", Operation::Sign},      {"verify", Operation::Verify},  {"verifys", Operation::Verify},
    };
    for (const auto& [label, op] : kLabels) {
        if (iequals(text, label)) return op;
    }
    return std::nullopt;
}

std::optional<Capability> parse_capability(std::string_view text) noexcept {
    for (auto cap : kAllCapabilities) {
        if (iequals(text, to_string(cap))) return cap;
    }
    return std::nullopt;
}

std::optional<HandshakeMode> parse_handshake_mode(std::string_view text) noexcept {
    if (iequals(text, "first") || iequals(text, "FIRST_USE")) return HandshakeMode::FirstUse;
    if (iequals(text, "reuse") || iequals(text, "SESSION_REUSE")) return HandshakeMode::SessionReuse;
    return std::nullopt;
}

std::optional<Role> parse_role(std::string_view text) noexcept {
    if (iequals(text, "server")) return Role::Server;
    if (iequals(text, "client")) return Role::Client;
    if (iequals(text, "standalone")) return Role::Standalone;
    return std::nullopt;
}

bool is_valid_algorithm_id(std::string_view id) noexcept {
    if (id.empty()) return false;
    return std::none_of(id.begin(), id.end(), [](char c) {
        return std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '|' || c == '/' || c == '\\';
    });
}

void AlgorithmDescriptor::validate() const {
    if (!is_valid_algorithm_id(id)) registry_error("invalid algorithm id '" + id + "'");
    if (public_key_bytes <= 0 || private_key_bytes <= 0 || payload_bytes <= 0) {
        registry_error("non-positive size for '" + id + "'");
    }
    switch (security_level) {
        case SecurityLevel::Unknown:
        case SecurityLevel::L1:
        case SecurityLevel::L3:
        case SecurityLevel::L5:
            break;
        default:
            registry_error("invalid security level for '" + id + "'");
    }
}

Registry::Registry(std::vector<AlgorithmDescriptor> algorithms, std::map<std::string, std::string> aliases)
    : algorithms_(std::move(algorithms)), aliases_(std::move(aliases)) {
    std::set<std::string, std::less<>> seen;
    for (const auto& d : algorithms_) {
        d.validate();
        if (!seen.insert(d.id).second) registry_error("duplicate id '" + d.id + "'");
    }
    for (const auto& [id, base] : aliases_) {
        if (id.empty() || base.empty()) registry_error("empty alias entry");
    }
}

const AlgorithmDescriptor* Registry::find(std::string_view id) const noexcept {
    for (const auto& d : algorithms_) {
        if (d.id == id) return &d;
    }
    for (const auto& d : algorithms_) {
        if (equal_ignoring_separator(d.id, id)) return &d;
    }
    return nullptr;
}

const AlgorithmDescriptor& Registry::at(std::string_view id) const {
    if (const auto* d = find(id)) return *d;
    registry_error("unknown algorithm '" + std::string(id) + "'");
}

std::optional<std::string> Registry::base_scheme(std::string_view id) const {
    if (auto it = aliases_.find(std::string(id)); it != aliases_.end()) return it->second;
    return std::nullopt;
}

std::vector<AlgorithmDescriptor> Registry::with_capability(Capability cap) const {
    std::vector<AlgorithmDescriptor> out;
    std::copy_if(algorithms_.begin(), algorithms_.end(), std::back_inserter(out),
                 [cap](const AlgorithmDescriptor& d) { return d.capabilities.has(cap); });
    return out;
}

void Registry::enable(std::string_view id) {
    for (auto& d : algorithms_) {
        if (d.id == id || equal_ignoring_separator(d.id, id)) {
            d.capabilities = CapabilitySet::all();
            return;
        }
    }
    registry_error("cannot enable unknown algorithm '" + std::string(id) + "'");
}

// ---------------------------------------------------------------------------
// Registry document

namespace {

constexpr std::array<std::string_view, 9> kDescriptorKeys = {
    "id",      "family", "security_level", "public_key_bytes", "private_key_bytes", "payload_bytes",
    "standardised", "hybrid", "capabilities"};

std::int64_t size_field(const json& obj, const char* key, const std::string& id) {
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) registry_error(std::string(key) + " of '" + id + "' is not an integer");
    return v.get<std::int64_t>();
}

bool bool_field(const json& obj, const char* key, const std::string& id) {
    const auto& v = obj.at(key);
    if (!v.is_boolean()) registry_error(std::string(key) + " of '" + id + "' is not a boolean");
    return v.get<bool>();
}

AlgorithmDescriptor descriptor_from_json(const json& obj, std::size_t index) {
    if (!obj.is_object()) registry_error("entry " + std::to_string(index) + " is not an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(kDescriptorKeys.begin(), kDescriptorKeys.end(), key) == kDescriptorKeys.end()) {
            registry_error("entry " + std::to_string(index) + " has unknown key '" + key + "'");
        }
    }
    for (auto key : kDescriptorKeys) {
        if (!obj.contains(std::string(key))) {
            registry_error("entry " + std::to_string(index) + " is missing '" + std::string(key) + "'");
        }
    }

    AlgorithmDescriptor d;
    if (!obj["id"].is_string()) registry_error("entry " + std::to_string(index) + " id is not a string");
    d.id = obj["id"].get<std::string>();

    const auto& family = obj["family"];
    auto parsed_family = family.is_string() ? parse_family(family.get<std::string>()) : std::nullopt;
    if (!parsed_family) registry_error("unknown family for '" + d.id + "'");
    d.family = *parsed_family;

    const auto& level = obj["security_level"];
    if (level.is_null()) {
        d.security_level = SecurityLevel::Unknown;
    } else if (level.is_string() && iequals(level.get<std::string>(), "UNKNOWN")) {
        d.security_level = SecurityLevel::Unknown;
    } else if (level.is_number_integer()) {
        const auto v = level.get<int>();
        if (v != 1 && v != 3 && v != 5) registry_error("security_level of '" + d.id + "' not in {1,3,5}");
        d.security_level = static_cast<SecurityLevel>(v);
    } else {
        registry_error("security_level of '" + d.id + "' is malformed");
    }

    d.public_key_bytes = size_field(obj, "public_key_bytes", d.id);
    d.private_key_bytes = size_field(obj, "private_key_bytes", d.id);
    d.payload_bytes = size_field(obj, "payload_bytes", d.id);
    d.standardised = bool_field(obj, "standardised", d.id);
    d.hybrid = bool_field(obj, "hybrid", d.id);

    const auto& caps = obj["capabilities"];
    if (!caps.is_array()) registry_error("capabilities of '" + d.id + "' is not an array");
    for (const auto& c : caps) {
        auto cap = c.is_string() ? parse_capability(c.get<std::string>()) : std::nullopt;
        if (!cap) registry_error("unknown capability in '" + d.id + "'");
        d.capabilities.set(*cap);
    }
    return d;
}

json descriptor_to_json(const AlgorithmDescriptor& d) {
    json caps = json::array();
    for (auto cap : kAllCapabilities) {
        if (d.capabilities.has(cap)) caps.push_back(std::string(to_string(cap)));
    }
    json obj = json::object();
    obj["id"] = d.id;
    obj["family"] = std::string(to_string(d.family));
    if (d.security_level == SecurityLevel::Unknown) {
        obj["security_level"] = nullptr;
    } else {
        obj["security_level"] = static_cast<int>(d.security_level);
    }
    obj["public_key_bytes"] = d.public_key_bytes;
    obj["private_key_bytes"] = d.private_key_bytes;
    obj["payload_bytes"] = d.payload_bytes;
    obj["standardised"] = d.standardised;
    obj["hybrid"] = d.hybrid;
    obj["capabilities"] = std::move(caps);
    return obj;
}

}  // namespace

Registry parse_registry(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text.begin(), json_text.end());
    } catch (const json::parse_error& e) {
        registry_error(e.what());
    }

    // Either a bare array of descriptors, or {"algorithms": [...], "aliases": {id: base}}.
    const json* entries = &doc;
    std::map<std::string, std::string> aliases;
    if (doc.is_object()) {
        for (const auto& [key, value] : doc.items()) {
            if (key != "algorithms" && key != "aliases") registry_error("unknown top-level key '" + key + "'");
        }
        if (!doc.contains("algorithms")) registry_error("missing 'algorithms'");
        entries = &doc["algorithms"];
        if (doc.contains("aliases")) {
            const auto& table = doc["aliases"];
            if (!table.is_object()) registry_error("'aliases' must be an object");
            for (const auto& [id, base] : table.items()) {
                if (!base.is_string()) registry_error("alias of '" + id + "' is not a string");
                aliases.emplace(id, base.get<std::string>());
            }
        }
    }
    if (!entries->is_array()) registry_error("registry must be an array of descriptors");

    std::vector<AlgorithmDescriptor> algorithms;
    algorithms.reserve(entries->size());
    for (std::size_t i = 0; i < entries->size(); ++i) {
        algorithms.push_back(descriptor_from_json((*entries)[i], i));
    }
    return Registry(std::move(algorithms), std::move(aliases));
}

Registry load_registry(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) registry_error("cannot open registry file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_registry(buf.str());
}

std::string serialize_registry(const Registry& registry) {
    json entries = json::array();
    for (const auto& d : registry) entries.push_back(descriptor_to_json(d));
    if (registry.aliases().empty()) return entries.dump(2) + "\n";

    json doc = json::object();
    doc["algorithms"] = std::move(entries);
    doc["aliases"] = registry.aliases();
    return doc.dump(2) + "\n";
}

Registry builtin_registry() {
    using enum Family;
    using L = SecurityLevel;
    const auto all = CapabilitySet::all();
    // ML-DSA handshakes but has no TLS speed path; SLH-DSA is computational only.
    const CapabilitySet mldsa{Capability::CpuBench, Capability::MemBench, Capability::Handshake};
    const CapabilitySet slhdsa{Capability::CpuBench, Capability::MemBench};
    const CapabilitySet classical{Capability::Handshake, Capability::Speed};
    const CapabilitySet disabled{};

    std::vector<AlgorithmDescriptor> v = {
        {"ML-KEM-512", Kem, L::L1, 800, 1632, 768, true, false, all},
        {"ML-KEM-768", Kem, L::L3, 1184, 2400, 1088, true, false, all},
        {"ML-KEM-1024", Kem, L::L5, 1568, 3168, 1568, true, false, all},
        {"HQC-128", Kem, L::L1, 2249, 2289, 4497, false, false, disabled},
        {"HQC-192", Kem, L::L3, 4522, 4562, 9042, false, false, disabled},
        {"HQC-256", Kem, L::L5, 7245, 7285, 14485, false, false, disabled},
        {"P256-ECDH", Kem, L::Unknown, 65, 32, 65, true, false, classical},
        {"P384-ECDH", Kem, L::Unknown, 97, 48, 97, true, false, classical},
        {"P521-ECDH", Kem, L::Unknown, 133, 66, 133, true, false, classical},
        {"ML-DSA-44", Signature, L::L1, 1312, 2528, 2420, true, false, mldsa},
        {"ML-DSA-65", Signature, L::L3, 1952, 4000, 3293, true, false, mldsa},
        {"ML-DSA-87", Signature, L::L5, 2592, 4864, 4595, true, false, mldsa},
        {"FN-DSA-512", Signature, L::L1, 897, 1281, 690, false, false, all},
        {"FN-DSA-1024", Signature, L::L5, 1793, 2305, 1330, false, false, all},
        {"SLH-DSA-SHA2-128f", Signature, L::L1, 32, 64, 17088, true, false, slhdsa},
        {"SLH-DSA-SHA2-192f", Signature, L::L3, 48, 96, 35664, true, false, slhdsa},
        {"SLH-DSA-SHA2-256f", Signature, L::L5, 64, 128, 49856, true, false, slhdsa},
        {"RSA-2048", Signature, L::Unknown, 256, 256, 256, true, false, classical},
        {"ECC-P256", Signature, L::Unknown, 64, 32, 256, true, false, classical},
    };
    return Registry(std::move(v));
}

// ---------------------------------------------------------------------------
// Configuration

std::string sanitize_machine_id(std::string_view raw) {
    std::string out;
    std::copy_if(raw.begin(), raw.end(), std::back_inserter(out), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    });
    return out;
}

PeerAddress parse_peer_address(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
        throw Error(ErrorCode::InvalidConfig, "peer address must be host:port, got '" + std::string(text) + "'");
    }
    const auto port_text = text.substr(colon + 1);
    unsigned port = 0;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port == 0 || port > 65535) {
        throw Error(ErrorCode::InvalidConfig, "invalid port in '" + std::string(text) + "'");
    }
    return {std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

void BenchConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (machine_id.empty()) fail("machine_id is empty after sanitizing");
    if (sanitize_machine_id(machine_id) != machine_id) fail("machine_id must match [A-Za-z0-9_-]+");
    if (num_runs < 1) fail("num_runs must be >= 1");
    if (!(cpu_window_seconds > 0) || !std::isfinite(cpu_window_seconds)) fail("cpu_window_seconds must be > 0");
    if (!(tls_window_seconds > 0) || !std::isfinite(tls_window_seconds)) fail("tls_window_seconds must be > 0");
    if (!(control_timeout_seconds > 0) || !std::isfinite(control_timeout_seconds)) {
        fail("control_timeout_seconds must be > 0");
    }
    if (max_retries < 0) fail("max_retries must be >= 0");
    if (output_root.empty()) fail("output_root is empty");
    if (role != Role::Standalone) {
        if (peer_address.empty()) fail("peer_address is required for the " + std::string(to_string(role)) + " role");
        parse_peer_address(peer_address);
    }
}

// ---------------------------------------------------------------------------
// Records

void CpuOpRecord::validate(std::optional<double> window_seconds) const {
    if (algorithm_id.empty()) record_error("cpu record without algorithm id");
    if (run_index < 1) record_error("run_index must be >= 1");
    if (iterations < 1) record_error("iterations must be >= 1 for " + algorithm_id);
    if (!(mean_time_us >= 0) || !std::isfinite(mean_time_us)) record_error("mean_time_us must be >= 0");
    if (!(mean_cycles >= 0) || !std::isfinite(mean_cycles)) record_error("mean_cycles must be >= 0");
    if (window_seconds) {
        const double spent_s = mean_time_us * static_cast<double>(iterations) * 1e-6;
        if (spent_s > *window_seconds * 1.5) {
            record_error("mean_time_us x iterations exceeds 1.5x the window for " + algorithm_id);
        }
    }
}

void MemOpRecord::validate() const {
    if (algorithm_id.empty()) record_error("memory record without algorithm id");
    if (run_index < 1) record_error("run_index must be >= 1");
    if (heap_bytes < 0 || ext_heap_bytes < 0 || stack_bytes < 0) {
        record_error("negative byte count for " + algorithm_id);
    }
}

void HandshakeRecord::validate() const {
    if (sig_algorithm_id.empty() || kem_algorithm_id.empty()) record_error("handshake record without ids");
    if (run_index < 1) record_error("run_index must be >= 1");
    if (connections < 0) record_error("connections must be >= 0");
    if (!(real_seconds > 0) || !std::isfinite(real_seconds)) record_error("real_seconds must be > 0");
    if (!(user_connections_per_sec >= 0) || !std::isfinite(user_connections_per_sec)) {
        record_error("user_connections_per_sec must be >= 0");
    }
}

void SpeedRecord::validate() const {
    if (algorithm_id.empty()) record_error("speed record without algorithm id");
    if (run_index < 1) record_error("run_index must be >= 1");
    if (!(ops_per_second >= 0) || !std::isfinite(ops_per_second)) record_error("ops_per_second must be >= 0");
    if (!(mean_op_seconds >= 0) || !std::isfinite(mean_op_seconds)) record_error("mean_op_seconds must be >= 0");
    if (ops_per_second > 0) {
        const double expected = 1.0 / ops_per_second;
        if (std::abs(mean_op_seconds - expected) > 1e-6 * expected) {
            record_error("mean_op_seconds disagrees with 1/ops_per_second for " + algorithm_id);
        }
    }
}

SpeedRecord make_speed_record(std::string algorithm_id, Operation op, int run_index, std::int64_t iterations,
                              double elapsed_seconds) {
    if (iterations < 1 || !(elapsed_seconds > 0)) {
        record_error("speed measurement needs iterations >= 1 and elapsed > 0");
    }
    SpeedRecord r;
    r.algorithm_id = std::move(algorithm_id);
    r.operation = op;
    r.run_index = run_index;
    r.ops_per_second = static_cast<double>(iterations) / elapsed_seconds;
    r.mean_op_seconds = 1.0 / r.ops_per_second;
    return r;
}

}  // namespace pqbench
