// SPDX-License-Identifier: Apache-2.0

#include "pqbench/massif.hpp"

#include <fmt/format.h>

#include <array>
#include <charconv>
#include <optional>

#include "pqbench/error.hpp"
#include "pqbench/record_csv.hpp"

namespace pqbench {

namespace {

struct Line {
    std::string_view text;  // trimmed
    std::size_t offset = 0;
};

class MassifParser {
public:
    explicit MassifParser(std::string_view text) {
        std::size_t start = 0;
        while (start < text.size()) {
            auto end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            const auto t = trim(text.substr(start, end - start));
            if (!t.empty()) lines_.push_back({t, start});
            start = end + 1;
        }
        end_offset_ = text.size();
    }

    std::vector<MassifSnapshot> parse() {
        for (std::string_view key : {"desc:", "cmd:", "time_unit:"}) {
            if (at_end() || !peek().text.starts_with(key)) fail(offset(), key, "missing header line");
            ++pos_;
        }
        std::vector<MassifSnapshot> out;
        while (!at_end()) {
            auto snap = parse_block();
            if (!out.empty() && snap.index <= out.back().index) {
                fail(block_offset_, "snapshot", fmt::format("index {} does not follow {}", snap.index, out.back().index));
            }
            out.push_back(snap);
        }
        return out;
    }

private:
    enum Field { Time, Heap, Extra, Stacks, Tree, kFieldCount };
    static constexpr std::array<std::string_view, kFieldCount> kFieldNames = {"time", "mem_heap_B", "mem_heap_extra_B",
                                                                              "mem_stacks_B", "heap_tree"};

    MassifSnapshot parse_block() {
        block_offset_ = offset();
        expect_separator();
        MassifSnapshot snap;
        {
            const auto line = take();
            if (!line.text.starts_with("snapshot=")) fail(line.offset, "snapshot", "expected 'snapshot=N'");
            snap.index = number(line, line.text.substr(9), "snapshot");
        }
        expect_separator();

        std::array<bool, kFieldCount> seen{};
        while (!at_end() && !peek().text.starts_with("#-")) {
            const auto line = take();
            if (is_tree_line(line.text)) continue;
            const auto eq = line.text.find('=');
            const auto key = line.text.substr(0, eq);
            std::optional<Field> field;
            for (int f = 0; f < kFieldCount; ++f) {
                if (key == kFieldNames[f]) field = static_cast<Field>(f);
            }
            if (eq == std::string_view::npos || !field) fail(line.offset, key, "unexpected line");
            if (seen[*field]) fail(line.offset, key, "duplicate field");
            seen[*field] = true;
            const auto value = line.text.substr(eq + 1);
            switch (*field) {
                case Time: snap.time = number(line, value, key); break;
                case Heap: snap.mem_heap_bytes = number(line, value, key); break;
                case Extra: snap.mem_heap_extra_bytes = number(line, value, key); break;
                case Stacks: snap.mem_stacks_bytes = number(line, value, key); break;
                case Tree:
                    if (value.empty()) fail(line.offset, key, "empty value");
                    snap.is_detailed = value != "empty";
                    break;
                default: break;
            }
        }
        for (int f = 0; f < kFieldCount; ++f) {
            if (!seen[f]) fail(at_end() ? end_offset_ : peek().offset, kFieldNames[f],
                               fmt::format("missing in snapshot {}", snap.index));
        }
        return snap;
    }

    // Heap-tree entries look like "n2: 4416 (heap allocation functions) ...".
    static bool is_tree_line(std::string_view t) {
        if (t.size() < 3 || t[0] != 'n') return false;
        std::size_t i = 1;
        while (i < t.size() && t[i] >= '0' && t[i] <= '9') ++i;
        return i > 1 && i < t.size() && t[i] == ':';
    }

    void expect_separator() {
        if (at_end()) fail(end_offset_, "#-----------", "unexpected end of file");
        const auto line = take();
        if (!line.text.starts_with("#-")) fail(line.offset, "#-----------", "expected block separator");
    }

    std::int64_t number(const Line& line, std::string_view value, std::string_view field) const {
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size() || v < 0) {
            fail(line.offset, field, fmt::format("'{}' is not a non-negative integer", value));
        }
        return v;
    }

    [[noreturn]] static void fail(std::size_t at, std::string_view field, std::string_view what) {
        throw Error(ErrorCode::MalformedMassif, fmt::format("byte {}: field '{}': {}", at, field, what));
    }

    bool at_end() const { return pos_ >= lines_.size(); }
    const Line& peek() const { return lines_[pos_]; }
    Line take() { return lines_[pos_++]; }
    std::size_t offset() const { return at_end() ? end_offset_ : peek().offset; }

    std::vector<Line> lines_;
    std::size_t pos_ = 0;
    std::size_t end_offset_ = 0;
    std::size_t block_offset_ = 0;
};

}  // namespace

std::vector<MassifSnapshot> parse_massif(std::string_view text) { return MassifParser(text).parse(); }

std::string render_massif(std::span<const MassifSnapshot> snapshots, std::string_view cmd, std::string_view time_unit) {
    std::string out = fmt::format("desc: --time-unit={}\ncmd: {}\ntime_unit: {}\n", time_unit, cmd, time_unit);
    for (const auto& s : snapshots) {
        out += fmt::format(
            "#-----------\nsnapshot={}\n#-----------\ntime={}\nmem_heap_B={}\nmem_heap_extra_B={}\nmem_stacks_B={}\n",
            s.index, s.time, s.mem_heap_bytes, s.mem_heap_extra_bytes, s.mem_stacks_bytes);
        if (s.is_detailed) {
            out += "heap_tree=detailed\n";
            out += fmt::format("n1: {} (heap allocation functions) malloc/new/new[], --alloc-fns, etc.\n",
                               s.mem_heap_bytes);
            out += fmt::format(" n0: {} in 1 place, below massif's threshold (1.00%)\n", s.mem_heap_bytes);
        } else {
            out += "heap_tree=empty\n";
        }
    }
    return out;
}

PeakMemory peak_memory(std::span<const MassifSnapshot> snapshots) {
    if (snapshots.empty()) throw Error(ErrorCode::EmptyProfile, "profile has no snapshots");
    const MassifSnapshot* best = &snapshots.front();
    for (const auto& s : snapshots) {
        if (s.total() > best->total()) best = &s;
    }
    return {best->mem_heap_bytes, best->mem_heap_extra_bytes, best->mem_stacks_bytes};
}

}  // namespace pqbench
