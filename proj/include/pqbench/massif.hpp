// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pqbench {

struct MassifSnapshot {
    std::int64_t index = 0;
    std::int64_t time = 0;
    std::int64_t mem_heap_bytes = 0;
    std::int64_t mem_heap_extra_bytes = 0;
    std::int64_t mem_stacks_bytes = 0;
    bool is_detailed = false;

    std::int64_t total() const noexcept { return mem_heap_bytes + mem_heap_extra_bytes + mem_stacks_bytes; }

    friend bool operator==(const MassifSnapshot&, const MassifSnapshot&) = default;
};

/// Parses a Massif profile (`ms_print` input format). Heap-tree lines are
/// skipped. Throws MALFORMED_MASSIF naming the byte offset and the field.
std::vector<MassifSnapshot> parse_massif(std::string_view text);

/// Inverse of parse_massif. Detailed snapshots get a one-line heap tree.
std::string render_massif(std::span<const MassifSnapshot> snapshots, std::string_view cmd = "pqbench-op",
                          std::string_view time_unit = "i");

struct PeakMemory {
    std::int64_t heap_bytes = 0;
    std::int64_t ext_heap_bytes = 0;
    std::int64_t stack_bytes = 0;

    friend bool operator==(const PeakMemory&, const PeakMemory&) = default;
};

/// Snapshot with the largest heap + extra + stacks; the earliest wins a tie.
/// Throws EMPTY_PROFILE.
PeakMemory peak_memory(std::span<const MassifSnapshot> snapshots);

}  // namespace pqbench
