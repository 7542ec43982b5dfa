// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <random>
#include <thread>

#include <unistd.h>

#include "pqbench/compute_bench.hpp"
#include "pqbench/record_csv.hpp"

namespace pqbench {
namespace {

namespace fs = std::filesystem;

const fs::path kMassifDir = fs::path(PQBENCH_FIXTURE_DIR) / "massif";

fs::path fresh_dir(std::string_view name) {
    const auto dir = fs::temp_directory_path() / ("pqbench_" + std::string(name) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    return dir;
}

AlgorithmDescriptor kem_desc(std::string id, std::int64_t pk = 800, std::int64_t sk = 1632, std::int64_t ct = 768) {
    return {std::move(id), Family::Kem, SecurityLevel::L1, pk, sk, ct, true, false, CapabilitySet::all()};
}

AlgorithmDescriptor sig_desc(std::string id) {
    return {std::move(id), Family::Signature, SecurityLevel::L1, 1312, 2528, 2420, true, false, CapabilitySet::all()};
}

// ---------------------------------------------------------------------------
// run_fixed_window

TEST(FixedWindow, NoOpRunsManyCheapIterations) {
    SteadyWallClock clock;
    auto counter = make_default_cycle_counter();
    const auto w = run_fixed_window([] {}, 0.05, *counter, clock);
    EXPECT_GE(w.iterations, 1000);
    EXPECT_LT(w.mean_time_us(), 50.0);
    EXPECT_GE(w.elapsed_us, 0.05e6);
}

TEST(FixedWindow, SlowOpStillCompletesOnce) {
    SteadyWallClock clock;
    ClockCycleCounter counter;
    const auto w = run_fixed_window([] { std::this_thread::sleep_for(std::chrono::milliseconds(40)); }, 0.02, counter,
                                    clock);
    EXPECT_EQ(w.iterations, 1);
    EXPECT_GT(w.elapsed_cycles, 0.0);
}

TEST(FixedWindow, RejectsNonPositiveWindow) {
    SteadyWallClock clock;
    ClockCycleCounter counter;
    EXPECT_THROW(run_fixed_window([] {}, 0.0, counter, clock), Error);
}

TEST(FixedWindow, OpFailureBecomesOpPanicWithContext) {
    SteadyWallClock clock;
    ClockCycleCounter counter;
    try {
        run_fixed_window([] { throw std::runtime_error("boom"); }, 0.01, counter, clock, "ML-KEM-512 keygen");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OpPanic);
        EXPECT_NE(std::string(e.what()).find("ML-KEM-512 keygen: boom"), std::string::npos);
    }
}

// Elapsed time never falls short of the window and overshoots by at most the
// cost of the final call. Virtual time makes the bound exact.
TEST(FixedWindow, ElapsedBoundedByWindowPlusOneCall) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        VirtualTimebase tb;
        const double window = 1e-6 * static_cast<double>(1 + rng() % 5000);
        const std::uint64_t max_cost = 1 + rng() % 20000;
        double last_cost = 0;
        const auto w = run_fixed_window(
            [&] {
                last_cost = static_cast<double>(1 + rng() % max_cost);
                tb.advance_cycles(last_cost);
            },
            window, tb, tb);
        EXPECT_GE(w.elapsed_us, window * 1e6);
        EXPECT_LE(w.elapsed_us, window * 1e6 + last_cost / 1e3 + 1e-3);
        EXPECT_GE(w.iterations, 1);
    }
}

// ---------------------------------------------------------------------------
// bench_cpu

TEST(BenchCpu, RecordCountAndOrder) {
    const Registry reg({kem_desc("KEM-A"), sig_desc("SIG-B"), kem_desc("KEM-C", 1184, 2400, 1088)});
    VirtualTimebase tb;
    const auto providers = make_mock_providers(reg, 42, {.work_scale = 0.1, .nominal_cycles_per_unit = 100, .timebase = &tb});
    BenchConfig config;
    config.num_runs = 3;
    config.cpu_window_seconds = 0.01;
    const auto records = bench_cpu(reg, providers, config, tb, tb);
    ASSERT_EQ(records.size(), 27u);
    // Run-major, registry order, family triple order.
    EXPECT_EQ(records[0].algorithm_id, "KEM-A");
    EXPECT_EQ(records[0].operation, Operation::Keygen);
    EXPECT_EQ(records[1].operation, Operation::Encaps);
    EXPECT_EQ(records[2].operation, Operation::Decaps);
    EXPECT_EQ(records[3].algorithm_id, "SIG-B");
    EXPECT_EQ(records[3].operation, Operation::Keypair);
    EXPECT_EQ(records[5].operation, Operation::Verify);
    EXPECT_EQ(records[6].algorithm_id, "KEM-C");
    EXPECT_EQ(records[9].run_index, 2);
    EXPECT_EQ(records[26].run_index, 3);
    for (const auto& r : records) EXPECT_NO_THROW(r.validate(config.cpu_window_seconds));
}

TEST(BenchCpu, SkipsAlgorithmsWithoutCpuCapability) {
    auto hqc = kem_desc("HQC-128");
    hqc.capabilities = {};
    const Registry reg({kem_desc("KEM-A"), hqc});
    VirtualTimebase tb;
    const auto providers = make_mock_providers(reg, 1, {.nominal_cycles_per_unit = 100, .timebase = &tb});
    BenchConfig config;
    config.num_runs = 1;
    config.cpu_window_seconds = 0.01;
    const auto records = bench_cpu(reg, providers, config, tb, tb);
    ASSERT_EQ(records.size(), 3u);
    EXPECT_EQ(records[0].operation, Operation::Keygen);
    EXPECT_EQ(records[1].operation, Operation::Encaps);
    EXPECT_EQ(records[2].operation, Operation::Decaps);
}

TEST(BenchCpu, MissingProvider) {
    const Registry reg({kem_desc("KEM-A")});
    ProviderSet empty;
    SteadyWallClock clock;
    ClockCycleCounter counter;
    try {
        bench_cpu(reg, empty, BenchConfig{}, counter, clock);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingProvider);
    }
}

TEST(BenchCpu, HeavierOperationHasHigherMeanTime) {
    const auto d = kem_desc("KEM-A");
    const Registry reg({d});
    ProviderSet providers;
    providers.add(mock_kem(d, 5, MockCostProfile{{100'000, 400'000, 100'000}, {1, 1, 1}}));
    BenchConfig config;
    config.num_runs = 1;
    config.cpu_window_seconds = 0.05;
    SteadyWallClock clock;
    auto counter = make_default_cycle_counter();
    const auto records = bench_cpu(reg, providers, config, *counter, clock);
    ASSERT_EQ(records.size(), 3u);
    EXPECT_GT(records[1].mean_time_us, records[0].mean_time_us);
    EXPECT_GT(records[1].mean_cycles, records[0].mean_cycles);
}

TEST(BenchCpu, VirtualTimeRunsAreReproducible) {
    const auto reg = builtin_registry();
    auto once = [&] {
        VirtualTimebase tb;
        const auto providers = make_mock_providers(reg, 42, {.nominal_cycles_per_unit = 1000, .timebase = &tb});
        BenchConfig config;
        config.num_runs = 1;
        config.cpu_window_seconds = 0.2;
        return bench_cpu(reg, providers, config, tb, tb);
    };
    EXPECT_EQ(once(), once());
}

TEST(BenchCpu, WritesRunFileAfterEachAlgorithm) {
    const Registry reg({kem_desc("KEM-A"), sig_desc("SIG-B")});
    VirtualTimebase tb;
    const auto providers = make_mock_providers(reg, 1, {.nominal_cycles_per_unit = 100, .timebase = &tb});
    BenchConfig config;
    config.num_runs = 2;
    config.cpu_window_seconds = 0.005;
    const auto dir = fresh_dir("cpu_incremental");
    std::vector<std::size_t> rows_seen;
    CpuBenchOptions options;
    options.first_run_index = 4;
    options.output_dir = dir;
    options.on_algorithm_done = [&](const AlgorithmDescriptor&, int run) {
        rows_seen.push_back(read_cpu_csv(read_text_file(OutputLayout::run_file(dir, run))).size());
    };
    const auto records = bench_cpu(reg, providers, config, tb, tb, options);
    EXPECT_EQ(rows_seen, (std::vector<std::size_t>{3, 6, 3, 6}));
    EXPECT_EQ(next_run_index(dir), 6);
    EXPECT_EQ(records.front().run_index, 4);
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// Massif parsing

TEST(ParseMassif, PeakBlockCarriesTableRow) {
    const auto snaps = parse_massif(read_text_file(kMassifDir / "ML-KEM-512" / "keygen.massif"));
    ASSERT_EQ(snaps.size(), 5u);
    EXPECT_EQ(snaps[2].mem_heap_bytes, 4416);
    EXPECT_EQ(snaps[2].mem_heap_extra_bytes, 40);
    EXPECT_EQ(snaps[2].mem_stacks_bytes, 9752);
    EXPECT_TRUE(snaps[2].is_detailed);
    EXPECT_FALSE(snaps[0].is_detailed);
    EXPECT_EQ(peak_memory(snaps), (PeakMemory{4416, 40, 9752}));
}

TEST(ParseMassif, MinimalSingleBlock) {
    const auto snaps = parse_massif(
        "desc: (none)\ncmd: ./a\ntime_unit: i\n#-----------\nsnapshot=0\n#-----------\ntime=0\n"
        "mem_heap_B=4416\nmem_heap_extra_B=40\nmem_stacks_B=9752\nheap_tree=empty\n");
    ASSERT_EQ(snaps.size(), 1u);
    EXPECT_EQ(snaps[0], (MassifSnapshot{0, 0, 4416, 40, 9752, false}));
}

TEST(ParseMassif, HeaderOnlyIsEmpty) {
    EXPECT_TRUE(parse_massif(read_text_file(kMassifDir / "header_only.massif")).empty());
}

TEST(ParseMassif, MalformedFilesNameOffsetAndField) {
    const std::vector<std::pair<std::string, std::string>> cases = {
        {"missing_stacks.massif", "mem_stacks_B"},
        {"non_numeric.massif", "mem_heap_extra_B"},
        {"non_monotonic.massif", "snapshot"},
        {"missing_header.massif", "desc:"},
        {"negative.massif", "mem_heap_B"},
    };
    for (const auto& [file, field] : cases) {
        try {
            parse_massif(read_text_file(kMassifDir / "malformed" / file));
            ADD_FAILURE() << file;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::MalformedMassif) << file;
            const std::string msg = e.what();
            EXPECT_NE(msg.find("byte "), std::string::npos) << msg;
            EXPECT_NE(msg.find(field), std::string::npos) << msg;
        }
    }
}

TEST(ParseMassif, ReportsByteOffsetOfBadLine) {
    const std::string head = "desc: x\ncmd: y\ntime_unit: i\n#-----------\nsnapshot=0\n#-----------\ntime=0\n";
    const std::string text = head + "mem_heap_B=zz\n";
    try {
        parse_massif(text);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("byte " + std::to_string(head.size())), std::string::npos) << e.what();
    }
}

std::vector<MassifSnapshot> random_profile(std::mt19937_64& rng, std::size_t n) {
    std::vector<MassifSnapshot> snaps;
    std::int64_t index = 0;
    std::int64_t time = 0;
    std::uniform_int_distribution<std::int64_t> bytes(0, 200'000);
    for (std::size_t i = 0; i < n; ++i) {
        index += 1 + static_cast<std::int64_t>(rng() % 3);
        time += static_cast<std::int64_t>(rng() % 100'000);
        snaps.push_back({index, time, bytes(rng), bytes(rng) % 200, bytes(rng), rng() % 4 == 0});
    }
    return snaps;
}

TEST(ParseMassif, RenderThenParseIsIdentity) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto snaps = random_profile(rng, rng() % 40);
        EXPECT_EQ(parse_massif(render_massif(snaps)), snaps);
    }
}

TEST(PeakMemory, MatchesBruteForceMaximum) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 500; ++trial) {
        auto snaps = random_profile(rng, 1 + rng() % 30);
        if (trial % 3 == 0) {  // force ties
            for (auto& s : snaps) s.mem_stacks_bytes = 1000 - s.mem_heap_bytes % 7 - s.mem_heap_extra_bytes % 3;
        }
        std::int64_t best_total = -1;
        std::size_t best = 0;
        for (std::size_t i = 0; i < snaps.size(); ++i) {
            const auto t = snaps[i].mem_heap_bytes + snaps[i].mem_heap_extra_bytes + snaps[i].mem_stacks_bytes;
            if (t > best_total) {
                best_total = t;
                best = i;
            }
        }
        const auto peak = peak_memory(snaps);
        EXPECT_EQ(peak, (PeakMemory{snaps[best].mem_heap_bytes, snaps[best].mem_heap_extra_bytes,
                                    snaps[best].mem_stacks_bytes}));
    }
}

TEST(PeakMemory, ArgmaxTieAndEmpty) {
    const std::vector<MassifSnapshot> three = {{0, 0, 100, 0, 0, false}, {1, 1, 300, 0, 0, false}, {2, 2, 200, 0, 0, false}};
    EXPECT_EQ(peak_memory(three).heap_bytes, 300);
    const std::vector<MassifSnapshot> one = {{0, 0, 1, 2, 3, false}};
    EXPECT_EQ(peak_memory(one), (PeakMemory{1, 2, 3}));
    const std::vector<MassifSnapshot> tie = {{0, 0, 300, 0, 0, false}, {1, 1, 100, 100, 100, false}};
    EXPECT_EQ(peak_memory(tie), (PeakMemory{300, 0, 0}));
    try {
        peak_memory({});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyProfile);
    }
}

// ---------------------------------------------------------------------------
// bench_memory

TEST(BenchMemory, FixtureDirectoryYieldsOneRecordPerOpAndRun) {
    const Registry reg({kem_desc("ML-KEM-512")});
    FixtureDirectorySource source(kMassifDir);
    BenchConfig config;
    config.num_runs = 2;
    const auto raw = fresh_dir("mem_raw");
    const auto records = bench_memory(reg, source, config, {.first_run_index = 1, .output_dir = {}, .raw_dir = raw});
    ASSERT_EQ(records.size(), 6u);
    EXPECT_EQ(records[0], (MemOpRecord{"ML-KEM-512", Operation::Keygen, 1, 4416, 40, 9752}));
    EXPECT_EQ(records[1], (MemOpRecord{"ML-KEM-512", Operation::Encaps, 1, 5216, 56, 12408}));
    EXPECT_EQ(records[5], (MemOpRecord{"ML-KEM-512", Operation::Decaps, 2, 5248, 64, 13144}));
    EXPECT_TRUE(fs::exists(OutputLayout::raw_massif_file(raw, "ML-KEM-512", Operation::Decaps, 2)));
    fs::remove_all(raw);
}

TEST(BenchMemory, BikeKeygenPeak) {
    const Registry reg({kem_desc("BIKE-L1", 1541, 5223, 1573)});
    FixtureDirectorySource source(kMassifDir);
    BenchConfig config;
    config.num_runs = 1;
    const auto records = bench_memory(reg, source, config);
    ASSERT_EQ(records.size(), 3u);
    EXPECT_EQ(records[0], (MemOpRecord{"BIKE-L1", Operation::Keygen, 1, 7884, 52, 92056}));
}

TEST(BenchMemory, AlgorithmWithoutMemCapabilityIsSkipped) {
    auto falcon = sig_desc("Falcon-512");
    falcon.capabilities.clear(Capability::MemBench);
    const Registry reg({falcon, sig_desc("ML-DSA-44")});
    FixtureDirectorySource source(kMassifDir);
    BenchConfig config;
    config.num_runs = 1;
    const auto records = bench_memory(reg, source, config);
    ASSERT_EQ(records.size(), 3u);
    for (const auto& r : records) EXPECT_EQ(r.algorithm_id, "ML-DSA-44");
    EXPECT_EQ(records[1], (MemOpRecord{"ML-DSA-44", Operation::Sign, 1, 8624, 96, 49528}));
}

class TextSource final : public MassifSource {
public:
    explicit TextSource(std::string text) : text_(std::move(text)) {}
    std::string profile(const AlgorithmDescriptor&, Operation, int) override { return text_; }

private:
    std::string text_;
};

TEST(BenchMemory, ErrorsNameAlgorithmOperationAndRun) {
    const Registry reg({kem_desc("KEM-X")});
    BenchConfig config;
    config.num_runs = 1;
    {
        TextSource source(read_text_file(kMassifDir / "malformed" / "missing_stacks.massif"));
        try {
            bench_memory(reg, source, config, {.first_run_index = 7});
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::MalformedMassif);
            EXPECT_NE(std::string(e.what()).find("(KEM-X, keygen, run 7)"), std::string::npos) << e.what();
        }
    }
    {
        TextSource source(read_text_file(kMassifDir / "header_only.massif"));
        try {
            bench_memory(reg, source, config);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::EmptyProfile);
        }
    }
    {
        ProfilerCommandSource source("/nonexistent/valgrind --massif-out-file={out} {alg} {op}",
                                     fresh_dir("mem_scratch"));
        try {
            bench_memory(reg, source, config);
            FAIL();
        } catch (const ProcessError& e) {
            EXPECT_EQ(e.code(), ErrorCode::SpawnFailed);
            EXPECT_NE(std::string(e.what()).find("(KEM-X, keygen, run 1)"), std::string::npos) << e.what();
        }
    }
}

TEST(BenchMemory, ProfilerCommandOutputFileIsRead) {
    const auto scratch = fresh_dir("mem_profiler");
    const auto fixture = (kMassifDir / "ML-KEM-512" / "{op}.massif").string();
    ProfilerCommandSource source("cp " + fixture + " {out}", scratch);
    const Registry reg({kem_desc("ML-KEM-512")});
    BenchConfig config;
    config.num_runs = 1;
    const auto records = bench_memory(reg, source, config);
    ASSERT_EQ(records.size(), 3u);
    EXPECT_EQ(records[2], (MemOpRecord{"ML-KEM-512", Operation::Decaps, 1, 5248, 64, 13144}));
    fs::remove_all(scratch);
}

TEST(BenchMemory, MockSourceIsDeterministicAndWritesRunFiles) {
    const auto reg = builtin_registry();
    BenchConfig config;
    config.num_runs = 2;
    const auto dir = fresh_dir("mem_mock");
    MockMassifSource a(42);
    MockMassifSource b(42);
    const auto ra = bench_memory(reg, a, config, {.first_run_index = 1, .output_dir = dir});
    const auto rb = bench_memory(reg, b, config);
    EXPECT_EQ(ra, rb);
    EXPECT_EQ(ra.size(), 2u * 3u * reg.with_capability(Capability::MemBench).size());
    EXPECT_EQ(list_run_files(dir).size(), 2u);
    // Larger parameter sets need more heap.
    auto heap_of = [&](std::string_view id) {
        return std::find_if(ra.begin(), ra.end(), [&](const MemOpRecord& r) { return r.algorithm_id == id; })->heap_bytes;
    };
    EXPECT_LT(heap_of("ML-KEM-512"), heap_of("ML-KEM-768"));
    EXPECT_LT(heap_of("ML-KEM-768"), heap_of("ML-KEM-1024"));
    fs::remove_all(dir);
}

}  // namespace
}  // namespace pqbench
