// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pqbench/model.hpp"

namespace pqbench {

// ---------------------------------------------------------------------------
// Averaging. Every numeric field, iteration counts included, becomes its
// arithmetic mean over the runs of one identity.

struct AveragedCpu {
    std::string algorithm_id;
    Operation operation = Operation::Keygen;
    int runs_aggregated = 0;
    double iterations = 0;
    double mean_time_us = 0;
    double mean_cycles = 0;

    friend bool operator==(const AveragedCpu&, const AveragedCpu&) = default;
};

struct AveragedMem {
    std::string algorithm_id;
    Operation operation = Operation::Keygen;
    int runs_aggregated = 0;
    double heap_bytes = 0;
    double ext_heap_bytes = 0;
    double stack_bytes = 0;

    /// Peak footprint: heap + extra heap + stack.
    double footprint() const noexcept { return heap_bytes + ext_heap_bytes + stack_bytes; }
    friend bool operator==(const AveragedMem&, const AveragedMem&) = default;
};

struct AveragedHandshake {
    std::string sig_algorithm_id;
    std::string kem_algorithm_id;
    HandshakeMode mode = HandshakeMode::FirstUse;
    int runs_aggregated = 0;
    double connections = 0;
    double real_seconds = 0;
    double user_connections_per_sec = 0;

    friend bool operator==(const AveragedHandshake&, const AveragedHandshake&) = default;
};

struct AveragedSpeed {
    std::string algorithm_id;
    Operation operation = Operation::Keygen;
    int runs_aggregated = 0;
    double ops_per_second = 0;
    double mean_op_seconds = 0;

    friend bool operator==(const AveragedSpeed&, const AveragedSpeed&) = default;
};

// Grouped by identity, sorted like the run CSVs, independent of input order.
// The three operation-keyed overloads throw INCONSISTENT_GROUP when one
// algorithm carries operations of both families.
std::vector<AveragedCpu> average_runs(std::span<const CpuOpRecord> records);
std::vector<AveragedMem> average_runs(std::span<const MemOpRecord> records);
std::vector<AveragedHandshake> average_runs(std::span<const HandshakeRecord> records);
std::vector<AveragedSpeed> average_runs(std::span<const SpeedRecord> records);

// ---------------------------------------------------------------------------
// Filtering

struct FilterSet {
    /// Drop non-standardised algorithms whose base scheme (registry alias
    /// table) also has a standardised member among the records.
    bool prefer_standardised = false;
    std::vector<std::string> exclude_ids;
    /// Keep only algorithms the registry grants this capability.
    std::optional<Capability> require_capability;

    bool empty() const noexcept { return !prefer_standardised && exclude_ids.empty() && !require_capability; }
};

/// Exclusions that match neither the registry nor any record are reported
/// here as "UNKNOWN_EXCLUDE_ID: <id>"; they are not fatal.
using FilterWarnings = std::vector<std::string>;

// Handshake records go when either of their algorithms is filtered.
std::vector<CpuOpRecord> apply_filters(std::vector<CpuOpRecord> records, const Registry& registry,
                                       const FilterSet& filters, FilterWarnings* warnings = nullptr);
std::vector<MemOpRecord> apply_filters(std::vector<MemOpRecord> records, const Registry& registry,
                                       const FilterSet& filters, FilterWarnings* warnings = nullptr);
std::vector<HandshakeRecord> apply_filters(std::vector<HandshakeRecord> records, const Registry& registry,
                                           const FilterSet& filters, FilterWarnings* warnings = nullptr);
std::vector<SpeedRecord> apply_filters(std::vector<SpeedRecord> records, const Registry& registry,
                                       const FilterSet& filters, FilterWarnings* warnings = nullptr);
std::vector<AveragedCpu> apply_filters(std::vector<AveragedCpu> records, const Registry& registry,
                                       const FilterSet& filters, FilterWarnings* warnings = nullptr);
std::vector<AveragedMem> apply_filters(std::vector<AveragedMem> records, const Registry& registry,
                                       const FilterSet& filters, FilterWarnings* warnings = nullptr);
std::vector<AveragedHandshake> apply_filters(std::vector<AveragedHandshake> records, const Registry& registry,
                                             const FilterSet& filters, FilterWarnings* warnings = nullptr);
std::vector<AveragedSpeed> apply_filters(std::vector<AveragedSpeed> records, const Registry& registry,
                                         const FilterSet& filters, FilterWarnings* warnings = nullptr);

// ---------------------------------------------------------------------------
// Ranking

enum class RankingCriterion { CpuMeanTime, MemPeakFootprint, HandshakeRealConnections, SpeedMeanThroughput };

inline constexpr std::array<RankingCriterion, 4> kAllCriteria = {
    RankingCriterion::CpuMeanTime, RankingCriterion::MemPeakFootprint, RankingCriterion::HandshakeRealConnections,
    RankingCriterion::SpeedMeanThroughput};

std::string_view to_string(RankingCriterion c) noexcept;  // "CPU_MEAN_TIME", ...
/// True for the throughput criteria, false for time and memory.
constexpr bool higher_is_better(RankingCriterion c) noexcept {
    return c == RankingCriterion::HandshakeRealConnections || c == RankingCriterion::SpeedMeanThroughput;
}

struct AveragedResults {
    std::vector<AveragedCpu> cpu;
    std::vector<AveragedMem> mem;
    std::vector<AveragedHandshake> handshake;
    std::vector<AveragedSpeed> speed;
};

struct RankedEntry {
    std::string algorithm_id;  // signature scheme for handshake rankings
    std::string kem_id;        // handshake rankings only
    double score = 0;

    /// "sig / kem" for handshake entries, the algorithm id otherwise.
    std::string label() const;
    friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

/// Score = mean of the criterion field over an algorithm's three operations
/// (mean connections of one (sig, kem) pair in `mode` for handshakes).
/// Best first, ties by id ascending, at most n entries.
/// Throws INVALID_CONFIG for n < 1 and INCOMPLETE_TRIPLE.
std::vector<RankedEntry> rank_top_n(const AveragedResults& averaged, RankingCriterion criterion, int n,
                                    HandshakeMode mode = HandshakeMode::FirstUse);

/// Filters the criterion's category, then ranks.
std::vector<RankedEntry> rank_top_n(const AveragedResults& averaged, RankingCriterion criterion, int n,
                                    const Registry& registry, const FilterSet& filters,
                                    HandshakeMode mode = HandshakeMode::FirstUse, FilterWarnings* warnings = nullptr);

/// The operation-keyed categories restricted to one family; handshakes are kept.
AveragedResults restrict_to_family(const AveragedResults& averaged, Family family);

// ---------------------------------------------------------------------------
// External tool output

/// Header `Operation,Iterations,Total time (s),Time (us): mean,CPU cycles: mean`
/// with optional extra trailing columns. Throws MALFORMED_CSV naming the
/// 1-based line.
std::vector<CpuOpRecord> parse_liboqs_speed_csv(std::string_view text, std::string_view algorithm_id,
                                                int run_index = 1);

/// Sections headed `keygen/s encaps/s decaps/s` (or `keygens/s sign/s
/// verify/s`), each followed by `<alg> <v1> <v2> <v3>` rows. The long form
/// `keygen encaps decaps keygens/s encaps/s decaps/s` with seven-field rows
/// is read too. Throws MALFORMED_SPEED_OUTPUT.
std::vector<SpeedRecord> parse_openssl_speed(std::string_view text, int run_index = 1);

// ---------------------------------------------------------------------------
// Reports

struct RawResults {
    std::vector<CpuOpRecord> cpu;
    std::vector<MemOpRecord> mem;
    std::vector<HandshakeRecord> handshake;
    std::vector<SpeedRecord> speed;
};

/// Every run CSV under a machine directory (missing categories are empty).
/// Throws MALFORMED_CSV naming the file.
RawResults load_results(const std::filesystem::path& machine_dir);

AveragedResults average_all(const RawResults& raw);

struct ReportOptions {
    int top_n = 10;
    FilterSet filters;
};

struct ReportSummary {
    std::vector<std::filesystem::path> files;
    FilterWarnings warnings;
};

/// Writes `averaged/*.csv`, `rankings/*.csv` and `summary.md` under
/// `out_dir`. Output bytes depend only on the inputs. Throws IO_ERROR and
/// the ranking errors.
ReportSummary emit_report(const AveragedResults& averaged, const Registry& registry, const ReportOptions& options,
                          const std::filesystem::path& out_dir);

// CSV forms of the averaged records.
std::string to_csv(std::span<const AveragedCpu> records);
std::string to_csv(std::span<const AveragedMem> records);
std::string to_csv(std::span<const AveragedHandshake> records);
std::string to_csv(std::span<const AveragedSpeed> records);

}  // namespace pqbench
