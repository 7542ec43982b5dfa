// SPDX-License-Identifier: Apache-2.0

#include "pqbench/record_csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>
#include <tuple>

namespace pqbench {

namespace fs = std::filesystem;

std::string format_number(double value) {
    // Six fractional digits, more for small magnitudes so nine significant
    // digits survive.
    int precision = 6;
    if (value != 0.0 && std::isfinite(value)) {
        const int magnitude = static_cast<int>(std::floor(std::log10(std::abs(value))));
        precision = std::clamp(8 - magnitude, 6, 15);
    }
    std::string s = fmt::format("{:.{}f}", value, precision);
    if (const auto dot = s.find('.'); dot != std::string::npos) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s;
}

fs::path OutputLayout::run_file(const fs::path& dir, int run_index) {
    return dir / fmt::format("run_{}.csv", run_index);
}

fs::path OutputLayout::raw_massif_file(const fs::path& dir, std::string_view algorithm_id, Operation op,
                                       int run_index) {
    return dir / fmt::format("{}_{}_run{}.massif", algorithm_id, to_string(op), run_index);
}

namespace {

std::optional<int> run_number(const fs::path& file) {
    static const std::regex pattern(R"(run_([0-9]+)\.csv)");
    std::smatch m;
    const auto name = file.filename().string();
    if (!std::regex_match(name, m, pattern)) return std::nullopt;
    return std::stoi(m[1].str());
}

}  // namespace

std::vector<fs::path> list_run_files(const fs::path& dir) {
    std::vector<std::pair<int, fs::path>> found;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return {};
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file()) continue;
        if (auto k = run_number(entry.path())) found.emplace_back(*k, entry.path());
    }
    std::sort(found.begin(), found.end());
    std::vector<fs::path> out;
    for (auto& [k, p] : found) out.push_back(std::move(p));
    return out;
}

int next_run_index(const fs::path& dir) {
    int next = 1;
    for (const auto& p : list_run_files(dir)) next = std::max(next, *run_number(p) + 1);
    return next;
}

void write_text_file(const fs::path& path, std::string_view text) {
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw Error(ErrorCode::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot rename into " + path.string() + ": " + ec.message());
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// ---------------------------------------------------------------------------
// Writers

namespace {

auto cpu_key(const CpuOpRecord& r) { return std::tuple(std::string_view(r.algorithm_id), operation_index(r.operation), r.run_index); }
auto mem_key(const MemOpRecord& r) { return std::tuple(std::string_view(r.algorithm_id), operation_index(r.operation), r.run_index); }
auto speed_key(const SpeedRecord& r) { return std::tuple(std::string_view(r.algorithm_id), operation_index(r.operation), r.run_index); }
auto hs_key(const HandshakeRecord& r) {
    return std::tuple(std::string_view(r.sig_algorithm_id), std::string_view(r.kem_algorithm_id), static_cast<int>(r.mode), r.run_index);
}

template <class R, class Key>
std::vector<const R*> sorted(std::span<const R> records, Key key) {
    std::vector<const R*> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(&r);
    std::stable_sort(out.begin(), out.end(), [&](const R* a, const R* b) { return key(*a) < key(*b); });
    return out;
}

}  // namespace

std::string to_csv(std::span<const CpuOpRecord> records) {
    std::string out(kCpuCsvHeader);
    out += '\n';
    for (const auto* r : sorted(records, cpu_key)) {
        out += fmt::format("{},{},{},{},{},{},{}\n", r->algorithm_id, to_string(family_of(r->operation)),
                           to_string(r->operation), r->run_index, r->iterations, format_number(r->mean_time_us),
                           format_number(r->mean_cycles));
    }
    return out;
}

std::string to_csv(std::span<const MemOpRecord> records) {
    std::string out(kMemCsvHeader);
    out += '\n';
    for (const auto* r : sorted(records, mem_key)) {
        out += fmt::format("{},{},{},{},{},{},{}\n", r->algorithm_id, to_string(family_of(r->operation)),
                           to_string(r->operation), r->run_index, r->heap_bytes, r->ext_heap_bytes, r->stack_bytes);
    }
    return out;
}

std::string to_csv(std::span<const HandshakeRecord> records) {
    std::string out(kHandshakeCsvHeader);
    out += '\n';
    for (const auto* r : sorted(records, hs_key)) {
        out += fmt::format("{},{},{},{},{},{},{}\n", r->sig_algorithm_id, r->kem_algorithm_id, to_string(r->mode),
                           r->run_index, r->connections, format_number(r->real_seconds),
                           format_number(r->user_connections_per_sec));
    }
    return out;
}

std::string to_csv(std::span<const SpeedRecord> records) {
    std::string out(kSpeedCsvHeader);
    out += '\n';
    for (const auto* r : sorted(records, speed_key)) {
        out += fmt::format("{},{},{},{},{},{}\n", r->algorithm_id, to_string(family_of(r->operation)),
                           to_string(r->operation), r->run_index, format_number(r->ops_per_second),
                           format_number(r->mean_op_seconds));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Readers

namespace {

class RowReader {
public:
    RowReader(std::string_view line, std::size_t row, std::size_t expected_fields) : row_(row) {
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields_.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields_.size() != expected_fields) {
            fail(fmt::format("expected {} fields, got {}", expected_fields, fields_.size()));
        }
    }

    std::string text(std::size_t i) const {
        if (fields_[i].empty()) fail(fmt::format("field {} is empty", i + 1));
        return std::string(fields_[i]);
    }

    template <class T>
    T number(std::size_t i) const {
        T value{};
        const auto f = fields_[i];
        auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
        if (f.empty() || ec != std::errc{} || ptr != f.data() + f.size()) {
            fail(fmt::format("field {} ('{}') is not numeric", i + 1, f));
        }
        return value;
    }

    Operation operation(std::size_t family_field, std::size_t op_field) const {
        const auto family = parse_family(fields_[family_field]);
        const auto op = parse_operation(fields_[op_field]);
        if (!family || !op || family_of(*op) != *family) {
            fail(fmt::format("bad family/operation '{}','{}'", fields_[family_field], fields_[op_field]));
        }
        return *op;
    }

    HandshakeMode mode(std::size_t i) const {
        auto m = parse_handshake_mode(fields_[i]);
        if (!m) fail(fmt::format("bad mode '{}'", fields_[i]));
        return *m;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::MalformedCsv, fmt::format("row {}: {}", row_, what));
    }

private:
    std::size_t row_;
    std::vector<std::string_view> fields_;
};

template <class R, class Parse>
std::vector<R> read_csv(std::string_view text, std::string_view header, Parse parse) {
    const auto lines = split_lines(text);
    if (lines.empty() || trim(lines[0]) != header) {
        throw Error(ErrorCode::MalformedCsv, fmt::format("row 1: expected header '{}'", header));
    }
    const auto fields = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',') + 1);
    std::vector<R> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        RowReader row(lines[i], i + 1, fields);
        R record = parse(row);
        try {
            record.validate();
        } catch (const Error& e) {
            row.fail(e.what());
        }
        out.push_back(std::move(record));
    }
    return out;
}

}  // namespace

std::vector<CpuOpRecord> read_cpu_csv(std::string_view text) {
    return read_csv<CpuOpRecord>(text, kCpuCsvHeader, [](const RowReader& row) {
        return CpuOpRecord{row.text(0), row.operation(1, 2), row.number<int>(3), row.number<std::int64_t>(4),
                           row.number<double>(5), row.number<double>(6)};
    });
}

std::vector<MemOpRecord> read_mem_csv(std::string_view text) {
    return read_csv<MemOpRecord>(text, kMemCsvHeader, [](const RowReader& row) {
        return MemOpRecord{row.text(0),
                           row.operation(1, 2),
                           row.number<int>(3),
                           row.number<std::int64_t>(4),
                           row.number<std::int64_t>(5),
                           row.number<std::int64_t>(6)};
    });
}

std::vector<HandshakeRecord> read_handshake_csv(std::string_view text) {
    return read_csv<HandshakeRecord>(text, kHandshakeCsvHeader, [](const RowReader& row) {
        return HandshakeRecord{row.text(0),
                               row.text(1),
                               row.mode(2),
                               row.number<int>(3),
                               row.number<std::int64_t>(4),
                               row.number<double>(5),
                               row.number<double>(6)};
    });
}

std::vector<SpeedRecord> read_speed_csv(std::string_view text) {
    return read_csv<SpeedRecord>(text, kSpeedCsvHeader, [](const RowReader& row) {
        return SpeedRecord{row.text(0), row.operation(1, 2), row.number<int>(3), row.number<double>(4),
                           row.number<double>(5)};
    });
}

}  // namespace pqbench
