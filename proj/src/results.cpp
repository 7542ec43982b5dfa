// SPDX-License-Identifier: Apache-2.0

#include "pqbench/results.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "pqbench/record_csv.hpp"

namespace pqbench {

namespace fs = std::filesystem;

namespace {

// Sorting before summing makes the mean independent of input order, bit for bit.
double mean_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

template <class R>
void check_families(std::span<const R> records) {
    std::map<std::string_view, Family> seen;
    for (const auto& r : records) {
        const auto family = family_of(r.operation);
        auto [it, inserted] = seen.emplace(r.algorithm_id, family);
        if (!inserted && it->second != family) {
            throw Error(ErrorCode::InconsistentGroup,
                        fmt::format("'{}' has both KEM and signature operations", r.algorithm_id));
        }
    }
}

using OpKey = std::tuple<std::string_view, int>;

// Groups operation-keyed records by (algorithm, operation order).
template <class R>
std::map<OpKey, std::vector<const R*>> group_by_operation(std::span<const R> records) {
    check_families(records);
    std::map<OpKey, std::vector<const R*>> groups;
    for (const auto& r : records) groups[{r.algorithm_id, operation_index(r.operation)}].push_back(&r);
    return groups;
}

template <class R, class Field>
double field_mean(const std::vector<const R*>& group, Field field) {
    std::vector<double> values;
    values.reserve(group.size());
    for (const R* r : group) values.push_back(static_cast<double>(field(*r)));
    return mean_of(std::move(values));
}

}  // namespace

std::vector<AveragedCpu> average_runs(std::span<const CpuOpRecord> records) {
    std::vector<AveragedCpu> out;
    for (const auto& [key, group] : group_by_operation(records)) {
        out.push_back({group.front()->algorithm_id, group.front()->operation, static_cast<int>(group.size()),
                       field_mean(group, [](const CpuOpRecord& r) { return r.iterations; }),
                       field_mean(group, [](const CpuOpRecord& r) { return r.mean_time_us; }),
                       field_mean(group, [](const CpuOpRecord& r) { return r.mean_cycles; })});
    }
    return out;
}

std::vector<AveragedMem> average_runs(std::span<const MemOpRecord> records) {
    std::vector<AveragedMem> out;
    for (const auto& [key, group] : group_by_operation(records)) {
        out.push_back({group.front()->algorithm_id, group.front()->operation, static_cast<int>(group.size()),
                       field_mean(group, [](const MemOpRecord& r) { return r.heap_bytes; }),
                       field_mean(group, [](const MemOpRecord& r) { return r.ext_heap_bytes; }),
                       field_mean(group, [](const MemOpRecord& r) { return r.stack_bytes; })});
    }
    return out;
}

std::vector<AveragedHandshake> average_runs(std::span<const HandshakeRecord> records) {
    std::map<std::tuple<std::string_view, std::string_view, int>, std::vector<const HandshakeRecord*>> groups;
    for (const auto& r : records) {
        groups[{r.sig_algorithm_id, r.kem_algorithm_id, static_cast<int>(r.mode)}].push_back(&r);
    }
    std::vector<AveragedHandshake> out;
    for (const auto& [key, group] : groups) {
        const auto& first = *group.front();
        out.push_back({first.sig_algorithm_id, first.kem_algorithm_id, first.mode, static_cast<int>(group.size()),
                       field_mean(group, [](const HandshakeRecord& r) { return r.connections; }),
                       field_mean(group, [](const HandshakeRecord& r) { return r.real_seconds; }),
                       field_mean(group, [](const HandshakeRecord& r) { return r.user_connections_per_sec; })});
    }
    return out;
}

std::vector<AveragedSpeed> average_runs(std::span<const SpeedRecord> records) {
    std::vector<AveragedSpeed> out;
    for (const auto& [key, group] : group_by_operation(records)) {
        out.push_back({group.front()->algorithm_id, group.front()->operation, static_cast<int>(group.size()),
                       field_mean(group, [](const SpeedRecord& r) { return r.ops_per_second; }),
                       field_mean(group, [](const SpeedRecord& r) { return r.mean_op_seconds; })});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Filtering

namespace {

template <class R>
std::vector<std::string_view> ids_of(const R& r) {
    if constexpr (requires { r.sig_algorithm_id; }) {
        return {r.sig_algorithm_id, r.kem_algorithm_id};
    } else {
        return {r.algorithm_id};
    }
}

bool is_standardised(const Registry& registry, std::string_view id) {
    const auto* d = registry.find(id);
    return d != nullptr && d->standardised;
}

template <class R>
std::vector<R> filter_records(std::vector<R> records, const Registry& registry, const FilterSet& filters,
                              FilterWarnings* warnings) {
    std::set<std::string, std::less<>> present;
    for (const auto& r : records) {
        for (auto id : ids_of(r)) present.emplace(id);
    }

    std::set<std::string, std::less<>> dropped;
    for (const auto& id : filters.exclude_ids) {
        if (present.count(id) == 0 && registry.find(id) == nullptr && warnings != nullptr) {
            warnings->push_back(fmt::format("{}: {}", to_string(ErrorCode::UnknownExcludeId), id));
        }
        dropped.insert(id);
    }
    if (filters.require_capability) {
        for (const auto& id : present) {
            const auto* d = registry.find(id);
            if (d == nullptr || !d->capabilities.has(*filters.require_capability)) dropped.insert(id);
        }
    }
    if (filters.prefer_standardised) {
        std::map<std::string, std::vector<std::string>> schemes;
        for (const auto& id : present) schemes[registry.base_scheme(id).value_or(id)].push_back(id);
        for (const auto& [base, ids] : schemes) {
            const bool has_standard = std::any_of(ids.begin(), ids.end(),
                                                  [&](const std::string& id) { return is_standardised(registry, id); });
            if (!has_standard) continue;
            for (const auto& id : ids) {
                if (!is_standardised(registry, id)) dropped.insert(id);
            }
        }
    }

    if (dropped.empty()) return records;
    std::erase_if(records, [&](const R& r) {
        const auto ids = ids_of(r);
        return std::any_of(ids.begin(), ids.end(), [&](std::string_view id) { return dropped.count(id) != 0; });
    });
    return records;
}

}  // namespace

#define PQBENCH_FILTER_OVERLOAD(R)                                                                             \
    std::vector<R> apply_filters(std::vector<R> records, const Registry& registry, const FilterSet& filters, \
                                 FilterWarnings* warnings) {                                                 \
        return filter_records(std::move(records), registry, filters, warnings);                              \
    }

PQBENCH_FILTER_OVERLOAD(CpuOpRecord)
PQBENCH_FILTER_OVERLOAD(MemOpRecord)
PQBENCH_FILTER_OVERLOAD(HandshakeRecord)
PQBENCH_FILTER_OVERLOAD(SpeedRecord)
PQBENCH_FILTER_OVERLOAD(AveragedCpu)
PQBENCH_FILTER_OVERLOAD(AveragedMem)
PQBENCH_FILTER_OVERLOAD(AveragedHandshake)
PQBENCH_FILTER_OVERLOAD(AveragedSpeed)

#undef PQBENCH_FILTER_OVERLOAD

// ---------------------------------------------------------------------------
// Ranking

std::string_view to_string(RankingCriterion c) noexcept {
    switch (c) {
        case RankingCriterion::CpuMeanTime:
            return "CPU_MEAN_TIME";
        case RankingCriterion::MemPeakFootprint:
            return "MEM_PEAK_FOOTPRINT";
        case RankingCriterion::HandshakeRealConnections:
            return "HANDSHAKE_REAL_CONNECTIONS";
        case RankingCriterion::SpeedMeanThroughput:
            return "SPEED_MEAN_THROUGHPUT";
    }
    return "UNKNOWN";
}

std::string RankedEntry::label() const {
    return kem_id.empty() ? algorithm_id : algorithm_id + " / " + kem_id;
}

namespace {

template <class R, class Field>
std::vector<RankedEntry> triple_scores(const std::vector<R>& averaged, Field field) {
    std::map<std::string_view, std::map<int, double>> by_algorithm;
    std::map<std::string_view, Family> families;
    for (const auto& r : averaged) {
        by_algorithm[r.algorithm_id][operation_index(r.operation)] = field(r);
        families.emplace(r.algorithm_id, family_of(r.operation));
    }
    std::vector<RankedEntry> out;
    for (const auto& [id, ops] : by_algorithm) {
        if (ops.size() != 3) {
            std::vector<std::string_view> missing;
            for (auto op : operations_for(families.at(id))) {
                if (ops.count(operation_index(op)) == 0) missing.push_back(to_string(op));
            }
            throw Error(ErrorCode::IncompleteTriple,
                        fmt::format("'{}' lacks {}", id, fmt::join(missing, ", ")));
        }
        std::vector<double> values;
        for (const auto& [op, v] : ops) values.push_back(v);
        out.push_back({std::string(id), "", mean_of(std::move(values))});
    }
    return out;
}

}  // namespace

std::vector<RankedEntry> rank_top_n(const AveragedResults& averaged, RankingCriterion criterion, int n,
                                    HandshakeMode mode) {
    if (n < 1) throw Error(ErrorCode::InvalidConfig, fmt::format("top-n must be at least 1, got {}", n));

    std::vector<RankedEntry> entries;
    switch (criterion) {
        case RankingCriterion::CpuMeanTime:
            entries = triple_scores(averaged.cpu, [](const AveragedCpu& r) { return r.mean_time_us; });
            break;
        case RankingCriterion::MemPeakFootprint:
            entries = triple_scores(averaged.mem, [](const AveragedMem& r) { return r.footprint(); });
            break;
        case RankingCriterion::SpeedMeanThroughput:
            entries = triple_scores(averaged.speed, [](const AveragedSpeed& r) { return r.ops_per_second; });
            break;
        case RankingCriterion::HandshakeRealConnections:
            for (const auto& r : averaged.handshake) {
                if (r.mode == mode) entries.push_back({r.sig_algorithm_id, r.kem_algorithm_id, r.connections});
            }
            break;
    }

    const bool descending = higher_is_better(criterion);
    std::sort(entries.begin(), entries.end(), [&](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return descending ? a.score > b.score : a.score < b.score;
        return std::tie(a.algorithm_id, a.kem_id) < std::tie(b.algorithm_id, b.kem_id);
    });
    if (entries.size() > static_cast<std::size_t>(n)) entries.resize(static_cast<std::size_t>(n));
    return entries;
}

std::vector<RankedEntry> rank_top_n(const AveragedResults& averaged, RankingCriterion criterion, int n,
                                    const Registry& registry, const FilterSet& filters, HandshakeMode mode,
                                    FilterWarnings* warnings) {
    AveragedResults subset;
    switch (criterion) {
        case RankingCriterion::CpuMeanTime:
            subset.cpu = apply_filters(averaged.cpu, registry, filters, warnings);
            break;
        case RankingCriterion::MemPeakFootprint:
            subset.mem = apply_filters(averaged.mem, registry, filters, warnings);
            break;
        case RankingCriterion::HandshakeRealConnections:
            subset.handshake = apply_filters(averaged.handshake, registry, filters, warnings);
            break;
        case RankingCriterion::SpeedMeanThroughput:
            subset.speed = apply_filters(averaged.speed, registry, filters, warnings);
            break;
    }
    return rank_top_n(subset, criterion, n, mode);
}

AveragedResults restrict_to_family(const AveragedResults& averaged, Family family) {
    AveragedResults out;
    auto keep = [family](const auto& r) { return family_of(r.operation) == family; };
    std::copy_if(averaged.cpu.begin(), averaged.cpu.end(), std::back_inserter(out.cpu), keep);
    std::copy_if(averaged.mem.begin(), averaged.mem.end(), std::back_inserter(out.mem), keep);
    std::copy_if(averaged.speed.begin(), averaged.speed.end(), std::back_inserter(out.speed), keep);
    out.handshake = averaged.handshake;
    return out;
}

// ---------------------------------------------------------------------------
// External tool output

namespace {

std::vector<std::string_view> split_on(std::string_view line, char sep) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto at = line.find(sep, start);
        fields.push_back(trim(line.substr(start, at == std::string_view::npos ? at : at - start)));
        if (at == std::string_view::npos) break;
        start = at + 1;
    }
    return fields;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const auto start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    return tokens;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) return std::nullopt;
    }
    return value;
}

constexpr std::array<std::string_view, 5> kLiboqsColumns = {"Operation", "Iterations", "Total time (s)",
                                                            "Time (us): mean", "CPU cycles: mean"};

}  // namespace

std::vector<CpuOpRecord> parse_liboqs_speed_csv(std::string_view text, std::string_view algorithm_id,
                                                int run_index) {
    auto fail = [](std::size_t row, const std::string& what) -> Error {
        return Error(ErrorCode::MalformedCsv, fmt::format("row {}: {}", row, what));
    };
    if (!is_valid_algorithm_id(algorithm_id)) {
        throw Error(ErrorCode::MalformedCsv, fmt::format("invalid algorithm id '{}'", algorithm_id));
    }
    const auto lines = split_lines(text);
    if (lines.empty()) throw fail(1, "missing header");
    const auto header = split_on(lines[0], ',');
    if (header.size() < kLiboqsColumns.size() ||
        !std::equal(kLiboqsColumns.begin(), kLiboqsColumns.end(), header.begin())) {
        throw fail(1, fmt::format("expected header '{}'", fmt::join(kLiboqsColumns, ",")));
    }

    std::vector<CpuOpRecord> out;
    std::optional<Family> family;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto row = i + 1;
        if (trim(lines[i]).empty()) continue;
        const auto fields = split_on(lines[i], ',');
        if (fields.size() != header.size()) {
            throw fail(row, fmt::format("expected {} fields, got {}", header.size(), fields.size()));
        }
        const auto op = parse_operation(fields[0]);
        if (!op) throw fail(row, fmt::format("unknown operation '{}'", fields[0]));
        if (family && *family != family_of(*op)) throw fail(row, "operations of both families");
        family = family_of(*op);
        if (std::any_of(out.begin(), out.end(), [&](const CpuOpRecord& r) { return r.operation == *op; })) {
            throw fail(row, fmt::format("duplicate operation '{}'", fields[0]));
        }

        const auto iterations = parse_number<std::int64_t>(fields[1]);
        const auto total = parse_number<double>(fields[2]);
        const auto time_us = parse_number<double>(fields[3]);
        const auto cycles = parse_number<double>(fields[4]);
        if (!iterations || !total || !time_us || !cycles) throw fail(row, "non-numeric field");
        if (*total < 0) throw fail(row, "negative total time");

        CpuOpRecord record{std::string(algorithm_id), *op, run_index, *iterations, *time_us, *cycles};
        try {
            record.validate();
        } catch (const Error& e) {
            throw fail(row, e.detail());
        }
        out.push_back(std::move(record));
    }
    return out;
}

namespace {

struct SpeedSection {
    std::array<Operation, 3> operations{};
    std::size_t columns = 0;      // tokens per row, algorithm included
    std::size_t first_rate = 1;   // index of the keygen/s column in a row
};

std::optional<Operation> rate_operation(std::string_view token) {
    if (token.size() < 3 || token.substr(token.size() - 2) != "/s") return std::nullopt;
    return parse_operation(token.substr(0, token.size() - 2));
}

// A header is three `<op>/s` tokens, or three `<op>` tokens followed by three `<op>/s`.
std::optional<SpeedSection> speed_header(const std::vector<std::string_view>& tokens) {
    if (tokens.empty()) return std::nullopt;
    SpeedSection section;
    std::vector<std::string_view> rates;
    if (tokens.size() == 3 && rate_operation(tokens[0]) == Operation::Keygen) {
        rates = tokens;
        section.columns = 4;
        section.first_rate = 1;
    } else if (tokens.size() == 6 && parse_operation(tokens[0]) == Operation::Keygen &&
               rate_operation(tokens[3]) == Operation::Keygen) {
        rates.assign(tokens.begin() + 3, tokens.end());
        section.columns = 7;
        section.first_rate = 4;
        for (int i = 0; i < 3; ++i) {
            if (parse_operation(tokens[i]) != rate_operation(rates[i])) return std::nullopt;
        }
    } else {
        return std::nullopt;
    }
    for (int i = 0; i < 3; ++i) {
        const auto op = rate_operation(rates[i]);
        if (!op) return std::nullopt;
        section.operations[i] = *op;
    }
    // "keygen/s" names the KEM and the signature keypair alike; the next two columns decide.
    const auto family = family_of(section.operations[1]);
    if (family_of(section.operations[2]) != family) return std::nullopt;
    section.operations = operations_for(family);
    return section;
}

}  // namespace

std::vector<SpeedRecord> parse_openssl_speed(std::string_view text, int run_index) {
    auto fail = [](std::size_t line, const std::string& what) -> Error {
        return Error(ErrorCode::MalformedSpeedOutput, fmt::format("line {}: {}", line, what));
    };
    const auto lines = split_lines(text);
    std::optional<SpeedSection> section;
    std::set<std::string, std::less<>> seen;
    std::vector<SpeedRecord> out;
    std::size_t first_content = 0;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto number = i + 1;
        const auto tokens = split_whitespace(lines[i]);
        if (tokens.empty()) continue;
        if (first_content == 0) first_content = number;
        if (auto header = speed_header(tokens)) {
            section = *header;
            continue;
        }
        // Progress lines before the first table are not part of the contract.
        if (!section) continue;

        if (tokens.size() != section->columns) {
            throw fail(number, fmt::format("expected {} fields, got {}", section->columns, tokens.size()));
        }
        const std::string id(tokens[0]);
        if (!is_valid_algorithm_id(id)) throw fail(number, fmt::format("invalid algorithm id '{}'", id));
        if (!seen.insert(id).second) throw fail(number, fmt::format("duplicate row for '{}'", id));
        for (std::size_t c = 1; c < section->first_rate; ++c) {
            auto t = tokens[c];
            if (!t.empty() && t.back() == 's') t.remove_suffix(1);
            if (!parse_number<double>(t)) throw fail(number, fmt::format("non-numeric time '{}'", tokens[c]));
        }
        for (std::size_t k = 0; k < 3; ++k) {
            const auto token = tokens[section->first_rate + k];
            const auto rate = parse_number<double>(token);
            if (!rate || *rate < 0) throw fail(number, fmt::format("non-numeric throughput '{}'", token));
            SpeedRecord record{id, section->operations[k], run_index, *rate, *rate > 0 ? 1.0 / *rate : 0.0};
            try {
                record.validate();
            } catch (const Error& e) {
                throw fail(number, e.detail());
            }
            out.push_back(std::move(record));
        }
    }
    if (first_content != 0 && !section) throw fail(first_content, "no keygen/s header line");
    return out;
}

// ---------------------------------------------------------------------------
// Loading and averaging

namespace {

template <class R, class Reader>
void load_category(const fs::path& dir, std::vector<R>& into, Reader read) {
    for (const auto& file : list_run_files(dir)) {
        try {
            auto records = read(read_text_file(file));
            into.insert(into.end(), std::make_move_iterator(records.begin()), std::make_move_iterator(records.end()));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MalformedCsv) throw;
            throw Error(ErrorCode::MalformedCsv, fmt::format("{}: {}", file.string(), e.detail()));
        }
    }
}

}  // namespace

RawResults load_results(const fs::path& machine_dir) {
    const OutputLayout layout(machine_dir);
    RawResults raw;
    load_category(layout.cpu_dir(), raw.cpu, read_cpu_csv);
    load_category(layout.memory_dir(), raw.mem, read_mem_csv);
    load_category(layout.handshake_dir(), raw.handshake, read_handshake_csv);
    load_category(layout.speed_dir(), raw.speed, read_speed_csv);
    return raw;
}

AveragedResults average_all(const RawResults& raw) {
    return {average_runs(std::span<const CpuOpRecord>(raw.cpu)), average_runs(std::span<const MemOpRecord>(raw.mem)),
            average_runs(std::span<const HandshakeRecord>(raw.handshake)),
            average_runs(std::span<const SpeedRecord>(raw.speed))};
}

// ---------------------------------------------------------------------------
// Report

std::string to_csv(std::span<const AveragedCpu> records) {
    std::string out = "algorithm,family,operation,runs,iterations,mean_time_us,mean_cycles\n";
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{},{},{},{}\n", r.algorithm_id, to_string(family_of(r.operation)),
                           to_string(r.operation), r.runs_aggregated, format_number(r.iterations),
                           format_number(r.mean_time_us), format_number(r.mean_cycles));
    }
    return out;
}

std::string to_csv(std::span<const AveragedMem> records) {
    std::string out = "algorithm,family,operation,runs,heap_bytes,ext_heap_bytes,stack_bytes,footprint_bytes\n";
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{},{},{},{},{}\n", r.algorithm_id, to_string(family_of(r.operation)),
                           to_string(r.operation), r.runs_aggregated, format_number(r.heap_bytes),
                           format_number(r.ext_heap_bytes), format_number(r.stack_bytes),
                           format_number(r.footprint()));
    }
    return out;
}

std::string to_csv(std::span<const AveragedHandshake> records) {
    std::string out = "sig_algorithm,kem_algorithm,mode,runs,connections,real_seconds,user_connections_per_sec\n";
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{},{},{},{}\n", r.sig_algorithm_id, r.kem_algorithm_id, to_string(r.mode),
                           r.runs_aggregated, format_number(r.connections), format_number(r.real_seconds),
                           format_number(r.user_connections_per_sec));
    }
    return out;
}

std::string to_csv(std::span<const AveragedSpeed> records) {
    std::string out = "algorithm,family,operation,runs,ops_per_second,mean_op_seconds\n";
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{},{},{}\n", r.algorithm_id, to_string(family_of(r.operation)),
                           to_string(r.operation), r.runs_aggregated, format_number(r.ops_per_second),
                           format_number(r.mean_op_seconds));
    }
    return out;
}

namespace {

struct RankingTable {
    std::string file_stem;
    std::string title;
    std::string score_label;
    bool pairs = false;
    std::vector<RankedEntry> entries;
};

std::string ranking_csv(const RankingTable& table) {
    std::string out = table.pairs ? "rank,sig_algorithm,kem_algorithm,score\n" : "rank,algorithm,score\n";
    int rank = 1;
    for (const auto& e : table.entries) {
        if (table.pairs) {
            out += fmt::format("{},{},{},{}\n", rank++, e.algorithm_id, e.kem_id, format_number(e.score));
        } else {
            out += fmt::format("{},{},{}\n", rank++, e.algorithm_id, format_number(e.score));
        }
    }
    return out;
}

std::string ranking_markdown(const RankingTable& table) {
    std::string out = fmt::format("## {}\n\n", table.title);
    if (table.entries.empty()) return out + "no data\n\n";
    if (table.pairs) {
        out += fmt::format("| Rank | Signature | KEM | {} |\n|---:|---|---|---:|\n", table.score_label);
    } else {
        out += fmt::format("| Rank | Algorithm | {} |\n|---:|---|---:|\n", table.score_label);
    }
    int rank = 1;
    for (const auto& e : table.entries) {
        if (table.pairs) {
            out += fmt::format("| {} | {} | {} | {} |\n", rank++, e.algorithm_id, e.kem_id, format_number(e.score));
        } else {
            out += fmt::format("| {} | {} | {} |\n", rank++, e.algorithm_id, format_number(e.score));
        }
    }
    return out + "\n";
}

std::string describe_filters(const FilterSet& filters) {
    std::vector<std::string> parts;
    if (filters.prefer_standardised) parts.emplace_back("standardised variants preferred");
    if (!filters.exclude_ids.empty()) {
        auto ids = filters.exclude_ids;
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        parts.push_back(fmt::format("excluded: {}", fmt::join(ids, ", ")));
    }
    if (filters.require_capability) {
        parts.push_back(fmt::format("requires capability {}", to_string(*filters.require_capability)));
    }
    return parts.empty() ? "none" : fmt::format("{}", fmt::join(parts, "; "));
}

}  // namespace

ReportSummary emit_report(const AveragedResults& averaged, const Registry& registry, const ReportOptions& options,
                          const fs::path& out_dir) {
    if (options.top_n < 1) {
        throw Error(ErrorCode::InvalidConfig, fmt::format("top-n must be at least 1, got {}", options.top_n));
    }
    ReportSummary summary;
    auto write = [&](const fs::path& path, std::string_view text) {
        write_text_file(path, text);
        summary.files.push_back(path);
    };

    const auto averaged_dir = out_dir / "averaged";
    write(averaged_dir / "cpu.csv", to_csv(std::span<const AveragedCpu>(averaged.cpu)));
    write(averaged_dir / "memory.csv", to_csv(std::span<const AveragedMem>(averaged.mem)));
    write(averaged_dir / "handshake.csv", to_csv(std::span<const AveragedHandshake>(averaged.handshake)));
    write(averaged_dir / "speed.csv", to_csv(std::span<const AveragedSpeed>(averaged.speed)));

    // An exclusion is unknown only if no category knows it.
    std::array<FilterWarnings, 4> warned;
    AveragedResults filtered;
    filtered.cpu = apply_filters(averaged.cpu, registry, options.filters, &warned[0]);
    filtered.mem = apply_filters(averaged.mem, registry, options.filters, &warned[1]);
    filtered.handshake = apply_filters(averaged.handshake, registry, options.filters, &warned[2]);
    filtered.speed = apply_filters(averaged.speed, registry, options.filters, &warned[3]);
    for (const auto& w : warned[0]) {
        if (std::all_of(warned.begin() + 1, warned.end(), [&](const FilterWarnings& other) {
                return std::find(other.begin(), other.end(), w) != other.end();
            })) {
            summary.warnings.push_back(w);
        }
    }

    const int n = options.top_n;
    std::vector<RankingTable> tables;
    for (auto family : {Family::Kem, Family::Signature}) {
        const auto subset = restrict_to_family(filtered, family);
        const std::string tag = family == Family::Kem ? "kem" : "signature";
        const std::string name = family == Family::Kem ? "KEM" : "Signature";
        tables.push_back({"cpu_mean_time_" + tag, "CPU: lowest mean operation time, " + name, "Mean time (us)",
                          false, rank_top_n(subset, RankingCriterion::CpuMeanTime, n)});
        tables.push_back({"mem_peak_footprint_" + tag, "Memory: lowest mean peak footprint, " + name,
                          "Mean footprint (bytes)", false, rank_top_n(subset, RankingCriterion::MemPeakFootprint, n)});
        tables.push_back({"speed_mean_throughput_" + tag, "Speed: highest mean throughput, " + name,
                          "Mean ops/s", false, rank_top_n(subset, RankingCriterion::SpeedMeanThroughput, n)});
    }
    tables.push_back({"handshake_first_use", "Handshake: most connections in real time, first use", "Connections",
                      true, rank_top_n(filtered, RankingCriterion::HandshakeRealConnections, n,
                                       HandshakeMode::FirstUse)});
    tables.push_back({"handshake_session_reuse", "Handshake: most connections in real time, session reuse",
                      "Connections", true,
                      rank_top_n(filtered, RankingCriterion::HandshakeRealConnections, n,
                                 HandshakeMode::SessionReuse)});

    std::string md = "# Benchmark summary\n\n";
    md += fmt::format("Top {} per criterion. Filters: {}.\n\n", n, describe_filters(options.filters));
    for (const auto& table : tables) {
        write(out_dir / "rankings" / (table.file_stem + ".csv"), ranking_csv(table));
        md += ranking_markdown(table);
    }
    if (!summary.warnings.empty()) {
        md += "## Warnings\n\n";
        for (const auto& w : summary.warnings) md += "- " + w + "\n";
        md += "\n";
    }
    md.pop_back();  // single trailing newline
    write(out_dir / "summary.md", md);
    return summary;
}

}  // namespace pqbench
