// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pqbench/model.hpp"

namespace pqbench {

inline constexpr std::string_view kCpuCsvHeader = "algorithm,family,operation,run,iterations,mean_time_us,mean_cycles";
inline constexpr std::string_view kMemCsvHeader =
    "algorithm,family,operation,run,heap_bytes,ext_heap_bytes,stack_bytes";
inline constexpr std::string_view kHandshakeCsvHeader =
    "sig_algorithm,kem_algorithm,mode,run,connections,real_seconds,user_connections_per_sec";
inline constexpr std::string_view kSpeedCsvHeader = "algorithm,family,operation,run,ops_per_second,mean_op_seconds";

/// Fixed notation, trailing zeros dropped. Six fractional digits, more below 100
/// so that nine significant digits are kept.
std::string format_number(double value);

/// Result tree of one machine:
///
///   <root>/<machine>/computational/cpu/run_<k>.csv
///   <root>/<machine>/computational/memory/run_<k>.csv
///   <root>/<machine>/computational/memory/raw/<alg>_<op>_run<k>.massif
///   <root>/<machine>/tls/handshake/run_<k>.csv
///   <root>/<machine>/tls/speed/run_<k>.csv
///   <root>/<machine>/report/
struct OutputLayout {
    std::filesystem::path machine_dir;

    explicit OutputLayout(std::filesystem::path dir) : machine_dir(std::move(dir)) {}

    std::filesystem::path cpu_dir() const { return machine_dir / "computational" / "cpu"; }
    std::filesystem::path memory_dir() const { return machine_dir / "computational" / "memory"; }
    std::filesystem::path memory_raw_dir() const { return memory_dir() / "raw"; }
    std::filesystem::path handshake_dir() const { return machine_dir / "tls" / "handshake"; }
    std::filesystem::path speed_dir() const { return machine_dir / "tls" / "speed"; }
    std::filesystem::path report_dir() const { return machine_dir / "report"; }

    static std::filesystem::path run_file(const std::filesystem::path& dir, int run_index);
    static std::filesystem::path raw_massif_file(const std::filesystem::path& dir, std::string_view algorithm_id,
                                                 Operation op, int run_index);
};

/// 1 + the largest k among `run_<k>.csv` in `dir` (1 when none exist).
int next_run_index(const std::filesystem::path& dir);

/// `run_<k>.csv` files in `dir`, ordered by k. Empty when `dir` is missing.
std::vector<std::filesystem::path> list_run_files(const std::filesystem::path& dir);

/// Writes through a temporary file and a rename. Throws IO_ERROR.
void write_text_file(const std::filesystem::path& path, std::string_view text);
/// Throws IO_ERROR.
std::string read_text_file(const std::filesystem::path& path);

// Rows are sorted by (algorithm, operation order within the family, run);
// handshake rows by (sig, kem, mode, run).
std::string to_csv(std::span<const CpuOpRecord> records);
std::string to_csv(std::span<const MemOpRecord> records);
std::string to_csv(std::span<const HandshakeRecord> records);
std::string to_csv(std::span<const SpeedRecord> records);

/// Rewrites `run_<k>.csv` in `dir` with the run-k records among `all`.
template <class R>
void write_run_file(const std::filesystem::path& dir, int run_index, const std::vector<R>& all) {
    std::vector<R> run;
    for (const auto& r : all) {
        if (r.run_index == run_index) run.push_back(r);
    }
    write_text_file(OutputLayout::run_file(dir, run_index), to_csv(std::span<const R>(run)));
}

// Readers for the files above. Throw MALFORMED_CSV naming the 1-based row.
std::vector<CpuOpRecord> read_cpu_csv(std::string_view text);
std::vector<MemOpRecord> read_mem_csv(std::string_view text);
std::vector<HandshakeRecord> read_handshake_csv(std::string_view text);
std::vector<SpeedRecord> read_speed_csv(std::string_view text);

/// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view text);
std::string_view trim(std::string_view s) noexcept;

}  // namespace pqbench
