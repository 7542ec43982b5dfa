// SPDX-License-Identifier: Apache-2.0

#include "pqbench/cli.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cstdlib>
#include <istream>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pqbench/compute_bench.hpp"
#include "pqbench/handshake.hpp"
#include "pqbench/massif.hpp"
#include "pqbench/record_csv.hpp"
#include "pqbench/results.hpp"
#include "pqbench/tls_bench.hpp"

namespace pqbench {

namespace fs = std::filesystem;

std::string_view to_string(Command command) noexcept {
    switch (command) {
        case Command::GenKeys:
            return "gen-keys";
        case Command::ComputeBench:
            return "compute-bench";
        case Command::TlsBench:
            return "tls-bench";
        case Command::Parse:
            return "parse";
        case Command::Report:
            return "report";
        case Command::FullRun:
            return "full-run";
    }
    return "?";
}

std::optional<std::string> process_env(std::string_view name) {
    const char* value = std::getenv(std::string(name).c_str());
    if (value == nullptr) return std::nullopt;
    return std::string(value);
}

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Usage:
        case ErrorCode::InvalidConfig:
        case ErrorCode::MalformedRegistry:
            return 1;
        default:
            return 2;
    }
}

// ---------------------------------------------------------------------------
// Argument and config parsing

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

template <class T>
T config_value(const json& doc, const std::string& key) {
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception&) {
        config_error(fmt::format("config key '{}' has the wrong type", key));
    }
}

std::uint16_t port_value(std::int64_t port, std::string_view what) {
    if (port < 0 || port > 65535) config_error(fmt::format("{} {} is out of range", what, port));
    return static_cast<std::uint16_t>(port);
}

Role role_value(std::string_view text) {
    const auto role = parse_role(text);
    if (!role) config_error(fmt::format("unknown role '{}'", text));
    return *role;
}

void apply_config_file(CliOptions& o, const fs::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const Error& e) {
        config_error(e.detail());
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        config_error(fmt::format("{}: {}", path.string(), e.what()));
    }
    if (!doc.is_object()) config_error(path.string() + ": top level must be an object");

    auto& c = o.config;
    for (const auto& [key, value] : doc.items()) {
        if (key == "machine_id") c.machine_id = config_value<std::string>(doc, key);
        else if (key == "role") c.role = role_value(config_value<std::string>(doc, key));
        else if (key == "peer_address") c.peer_address = config_value<std::string>(doc, key);
        else if (key == "control_port") c.control_port = port_value(config_value<std::int64_t>(doc, key), key);
        else if (key == "data_port") c.data_port = port_value(config_value<std::int64_t>(doc, key), key);
        else if (key == "num_runs") c.num_runs = config_value<int>(doc, key);
        else if (key == "cpu_window_seconds") c.cpu_window_seconds = config_value<double>(doc, key);
        else if (key == "tls_window_seconds") c.tls_window_seconds = config_value<double>(doc, key);
        else if (key == "control_timeout_seconds") c.control_timeout_seconds = config_value<double>(doc, key);
        else if (key == "max_retries") c.max_retries = config_value<int>(doc, key);
        else if (key == "output_root") c.output_root = config_value<std::string>(doc, key);
        else if (key == "mock") o.mock = config_value<bool>(doc, key);
        else if (key == "seed") o.seed = config_value<std::uint64_t>(doc, key);
        else if (key == "mock_work_scale") o.mock_work_scale = config_value<double>(doc, key);
        else if (key == "registry") o.registry_path = config_value<std::string>(doc, key);
        else if (key == "enable") o.enable_ids = config_value<std::vector<std::string>>(doc, key);
        else if (key == "adapter") o.adapter = config_value<std::string>(doc, key);
        else if (key == "speed_adapter") o.speed_adapter = config_value<std::string>(doc, key);
        else if (key == "profiler") o.profiler = config_value<std::string>(doc, key);
        else if (key == "massif_dir") o.massif_dir = config_value<std::string>(doc, key);
        else if (key == "credentials_dir") o.credentials_dir = config_value<std::string>(doc, key);
        else if (key == "sigs") o.sig_ids = config_value<std::vector<std::string>>(doc, key);
        else if (key == "kems") o.kem_ids = config_value<std::vector<std::string>>(doc, key);
        else if (key == "top_n") o.top_n = config_value<int>(doc, key);
        else if (key == "prefer_standardised") o.prefer_standardised = config_value<bool>(doc, key);
        else if (key == "exclude_ids") o.exclude_ids = config_value<std::vector<std::string>>(doc, key);
        else config_error(fmt::format("{}: unknown config key '{}'", path.string(), key));
    }
}

// Flag storage. Each value is applied only when its option was given.
struct Flags {
    std::string config_path, machine_id, out, registry, adapter, speed_adapter, profiler, massif_dir, credentials;
    int runs = 0, max_retries = 0, top = 0;
    std::uint64_t seed = 0;
    double mock_work_scale = 0, cpu_window = 0, window = 0, timeout = 0;
    std::string role, peer;
    std::int64_t control_port = 0, data_port = 0;
    std::vector<std::string> enable, exclude, sigs, kems;
    std::string input, kind, algorithm, operation, mode;
    int run = 0;
    std::vector<std::string> files;
};

ParseKind parse_kind_value(std::string_view text) {
    if (text == "liboqs-speed") return ParseKind::LiboqsSpeed;
    if (text == "openssl-speed") return ParseKind::OpensslSpeed;
    if (text == "s-time") return ParseKind::STime;
    if (text == "massif") return ParseKind::Massif;
    throw Error(ErrorCode::Usage, fmt::format("unknown --kind '{}'", text));
}

}  // namespace

std::optional<CliOptions> parse_cli(const std::vector<std::string>& args, const EnvLookup& env, std::ostream& out) {
    CLI::App app{"Post-quantum algorithm benchmark harness", "pqbench"};
    app.require_subcommand(1, 1);
    Flags f;

    const std::string global = "Global";
    auto* o_config = app.add_option("--config", f.config_path, "JSON config file (BenchConfig field names)")->group(global);
    auto* o_machine = app.add_option("--machine-id", f.machine_id, "Result directory label")->group(global);
    auto* o_runs = app.add_option("--runs", f.runs, "Runs per test")->group(global);
    auto* o_out = app.add_option("--out", f.out, "Output root")->group(global);
    auto* o_registry = app.add_option("--registry", f.registry, "Algorithm registry JSON")->group(global);
    auto* o_mock = app.add_flag("--mock", "Deterministic mock providers")->group(global);
    auto* o_seed = app.add_option("--seed", f.seed, "Mock seed (default 42)")->group(global);
    auto* o_scale = app.add_option("--mock-work-scale", f.mock_work_scale, "Mock cost multiplier")->group(global);
    auto* o_enable = app.add_option("--enable", f.enable, "Grant every capability to these ids")
                         ->delimiter(',')
                         ->group(global);
    auto* o_interactive = app.add_flag("--interactive", "Prompt for the main parameters")->group(global);

    const std::string compute = "compute-bench";
    auto* o_cpu_window = app.add_option("--cpu-window", f.cpu_window, "CPU window seconds")->group(compute);
    auto* o_adapter =
        app.add_option("--adapter", f.adapter, "External command: liboqs speed (compute) or s_time (tls client)")
            ->group(compute);
    auto* o_profiler = app.add_option("--profiler", f.profiler, "External Massif profiler command")->group(compute);
    auto* o_massif_dir = app.add_option("--massif-dir", f.massif_dir, "Directory of <alg>/<op>.massif")->group(compute);

    const std::string tls = "tls-bench";
    auto* o_role = app.add_option("--role", f.role, "server | client")->group(tls);
    auto* o_server = app.add_flag("--server", "Same as --role server")->group(tls);
    auto* o_client = app.add_flag("--client", "Same as --role client")->group(tls);
    o_server->excludes(o_client);
    o_server->excludes(o_role);
    o_client->excludes(o_role);
    auto* o_peer = app.add_option("--peer", f.peer, "host:port of the peer's control port")->group(tls);
    auto* o_control_port = app.add_option("--control-port", f.control_port, "Control listener port")->group(tls);
    auto* o_data_port = app.add_option("--data-port", f.data_port, "Handshake listener port")->group(tls);
    auto* o_window = app.add_option("--window", f.window, "TLS window seconds")->group(tls);
    auto* o_timeout = app.add_option("--timeout", f.timeout, "Control timeout seconds")->group(tls);
    auto* o_retries = app.add_option("--max-retries", f.max_retries, "Retries per test")->group(tls);
    auto* o_sigs = app.add_option("--sigs", f.sigs, "Handshake signature ids")->delimiter(',')->group(tls);
    auto* o_kems = app.add_option("--kems", f.kems, "Handshake KEM ids")->delimiter(',')->group(tls);
    auto* o_speed_adapter =
        app.add_option("--speed-adapter", f.speed_adapter, "External openssl-speed command")->group(tls);
    auto* o_credentials = app.add_option("--credentials", f.credentials, "Credential directory")->group(tls);

    const std::string report = "report";
    auto* o_top = app.add_option("--top", f.top, "Entries per ranking")->group(report);
    auto* o_prefer = app.add_flag("--prefer-standardised", "Drop non-standardised aliases")->group(report);
    auto* o_exclude = app.add_option("--exclude", f.exclude, "Ids left out of rankings")->delimiter(',')->group(report);
    auto* o_in = app.add_option("--in", f.input, "Machine directory to report on")->group(report);

    app.add_subcommand("gen-keys", "Write mock certificates and keys for every signature scheme")->fallthrough();
    app.add_subcommand("compute-bench", "CPU and memory benchmarks")->fallthrough();
    app.add_subcommand("tls-bench", "Handshake (and, as client, speed) benchmarks")->fallthrough();
    auto* parse = app.add_subcommand("parse", "Convert external tool output into run CSVs");
    parse->fallthrough();
    auto* o_kind = parse->add_option("--kind", f.kind, "liboqs-speed | openssl-speed | s-time | massif")->required();
    auto* o_algorithm = parse->add_option("--algorithm", f.algorithm, "Algorithm id (sig:kem for s-time)");
    auto* o_operation = parse->add_option("--operation", f.operation, "Operation (massif)");
    auto* o_mode = parse->add_option("--mode", f.mode, "first | reuse (s-time)");
    auto* o_run = parse->add_option("--run", f.run, "Run index (default: next free)");
    parse->add_option("files", f.files, "Input files")->required();
    app.add_subcommand("report", "Average, rank and summarise results")->fallthrough();
    app.add_subcommand("full-run", "Every stage for the configured role")->fallthrough();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, out);
        return std::nullopt;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, out);
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        throw Error(ErrorCode::Usage, e.what());
    }

    CliOptions o;
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    for (auto c : {Command::GenKeys, Command::ComputeBench, Command::TlsBench, Command::Parse, Command::Report,
                   Command::FullRun}) {
        if (to_string(c) == name) o.command = c;
    }

    if (auto root = env("PQBENCH_OUTPUT_ROOT"); root && !root->empty()) o.config.output_root = *root;
    if (*o_config) apply_config_file(o, f.config_path);

    auto& c = o.config;
    if (*o_machine) c.machine_id = f.machine_id;
    if (*o_runs) c.num_runs = f.runs;
    if (*o_out) c.output_root = f.out;
    if (*o_registry) o.registry_path = f.registry;
    if (*o_mock) o.mock = true;
    if (*o_seed) o.seed = f.seed;
    if (*o_scale) o.mock_work_scale = f.mock_work_scale;
    if (*o_enable) o.enable_ids = f.enable;
    if (*o_interactive) o.interactive = true;
    if (*o_cpu_window) c.cpu_window_seconds = f.cpu_window;
    if (*o_adapter) o.adapter = f.adapter;
    if (*o_profiler) o.profiler = f.profiler;
    if (*o_massif_dir) o.massif_dir = f.massif_dir;
    if (*o_role) c.role = role_value(f.role);
    if (*o_server) c.role = Role::Server;
    if (*o_client) c.role = Role::Client;
    if (*o_peer) c.peer_address = f.peer;
    if (*o_control_port) c.control_port = port_value(f.control_port, "--control-port");
    if (*o_data_port) c.data_port = port_value(f.data_port, "--data-port");
    if (*o_window) c.tls_window_seconds = f.window;
    if (*o_timeout) c.control_timeout_seconds = f.timeout;
    if (*o_retries) c.max_retries = f.max_retries;
    if (*o_sigs) o.sig_ids = f.sigs;
    if (*o_kems) o.kem_ids = f.kems;
    if (*o_speed_adapter) o.speed_adapter = f.speed_adapter;
    if (*o_credentials) o.credentials_dir = f.credentials;
    if (*o_top) o.top_n = f.top;
    if (*o_prefer) o.prefer_standardised = true;
    if (*o_exclude) o.exclude_ids = f.exclude;
    if (*o_in) o.input_dir = f.input;

    if (o.command == Command::Parse) {
        o.parse_kind = parse_kind_value(f.kind);
        (void)o_kind;
        if (*o_algorithm) o.parse_algorithm = f.algorithm;
        if (*o_operation) {
            o.parse_operation = parse_operation(f.operation);
            if (!o.parse_operation) throw Error(ErrorCode::Usage, "unknown --operation '" + f.operation + "'");
        }
        if (*o_mode) {
            o.parse_mode = parse_handshake_mode(f.mode);
            if (!o.parse_mode) throw Error(ErrorCode::Usage, "unknown --mode '" + f.mode + "'");
        }
        if (*o_run) o.parse_run = f.run;
        for (const auto& file : f.files) o.parse_files.emplace_back(file);
    }

    c.machine_id = sanitize_machine_id(c.machine_id);
    if (o.top_n < 1) config_error("--top must be at least 1");
    if (!(o.mock_work_scale > 0)) config_error("--mock-work-scale must be positive");
    return o;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Context {
    CliOptions& o;
    std::ostream& out;
    std::ostream& err;
    Registry registry;

    OutputLayout layout() const { return OutputLayout(o.config.machine_dir()); }

    template <class... Args>
    void note(fmt::format_string<Args...> format, Args&&... args) {
        err << "pqbench: " << fmt::format(format, std::forward<Args>(args)...) << '\n';
    }
};

Registry load_selected_registry(const CliOptions& o) {
    Registry registry = o.registry_path.empty() ? builtin_registry() : load_registry(o.registry_path);
    for (const auto& id : o.enable_ids) registry.enable(id);
    return registry;
}

std::string prompt(std::istream& in, std::ostream& out, std::string_view question, std::string_view current) {
    out << question << " [" << current << "]: " << std::flush;
    std::string line;
    if (!std::getline(in, line)) return std::string(current);
    const auto answer = trim(line);
    return answer.empty() ? std::string(current) : std::string(answer);
}

void ask_interactively(CliOptions& o, std::istream& in, std::ostream& out) {
    auto& c = o.config;
    c.machine_id = sanitize_machine_id(prompt(in, out, "Machine id", c.machine_id));
    const auto runs = prompt(in, out, "Runs", std::to_string(c.num_runs));
    try {
        c.num_runs = std::stoi(runs);
    } catch (const std::exception&) {
        config_error("runs must be an integer, got '" + runs + "'");
    }
    if (o.command == Command::TlsBench || o.command == Command::FullRun) {
        c.role = role_value(prompt(in, out, "Role (server/client/standalone)", to_string(c.role)));
        if (c.role != Role::Standalone) c.peer_address = prompt(in, out, "Peer host:port", c.peer_address);
    }
}

/// Configuration with the role ignored, for commands that do not talk to a peer.
void validate_local(const BenchConfig& config) {
    BenchConfig local = config;
    local.role = Role::Standalone;
    local.validate();
}

void cmd_gen_keys(Context& ctx) {
    validate_local(ctx.o.config);
    const auto dir = ctx.o.credentials();
    const auto manifest = generate_credentials(ctx.registry, dir, ctx.o.seed);
    ctx.note("wrote {} credentials to {}", manifest.entries.size(), dir.string());
}

std::vector<CpuOpRecord> cpu_from_adapter(Context& ctx, const fs::path& dir) {
    const auto& config = ctx.o.config;
    const int first = next_run_index(dir);
    const auto algorithms = ctx.registry.with_capability(Capability::CpuBench);
    std::vector<CpuOpRecord> all;
    for (int r = 0; r < config.num_runs; ++r) {
        const int run = first + r;
        for (const auto& d : algorithms) {
            const auto raw = dir / "raw" / fmt::format("{}_run{}.csv", d.id, run);
            std::error_code ec;
            fs::create_directories(raw.parent_path(), ec);
            fs::remove(raw, ec);
            const auto capture = external_adapter(
                ctx.o.adapter, OutputKind::LiboqsSpeed,
                {.alg = d.id, .window = format_number(config.cpu_window_seconds), .out = raw.string(), .op = {}});
            std::string text = capture.stdout_text;
            if (fs::exists(raw, ec)) {
                text = read_text_file(raw);
            } else {
                write_text_file(raw, text);
            }
            for (auto& record : parse_liboqs_speed_csv(text, d.id, run)) all.push_back(std::move(record));
            write_run_file(dir, run, all);
        }
    }
    return all;
}

void stage_compute(Context& ctx) {
    auto& o = ctx.o;
    validate_local(o.config);
    const auto layout = ctx.layout();
    if (!o.mock && o.adapter.empty()) {
        config_error("no CPU backend: pass --mock or --adapter <liboqs speed command>");
    }

    std::size_t cpu_records = 0;
    if (o.mock) {
        VirtualTimebase timebase;
        const auto providers = make_mock_providers(
            ctx.registry, o.seed, {.work_scale = o.mock_work_scale, .nominal_cycles_per_unit = 1000.0, .timebase = &timebase});
        CpuBenchOptions options;
        options.first_run_index = next_run_index(layout.cpu_dir());
        options.output_dir = layout.cpu_dir();
        cpu_records = bench_cpu(ctx.registry, providers, o.config, timebase, timebase, options).size();
    } else {
        cpu_records = cpu_from_adapter(ctx, layout.cpu_dir()).size();
    }
    ctx.note("cpu: {} records in {}", cpu_records, layout.cpu_dir().string());

    std::unique_ptr<MassifSource> source;
    if (o.mock) {
        source = std::make_unique<MockMassifSource>(o.seed);
    } else if (!o.profiler.empty()) {
        source = std::make_unique<ProfilerCommandSource>(o.profiler, layout.memory_raw_dir() / "scratch");
    } else if (!o.massif_dir.empty()) {
        source = std::make_unique<FixtureDirectorySource>(o.massif_dir);
    }
    if (!source) {
        ctx.note("memory: skipped (no --profiler or --massif-dir)");
        return;
    }
    MemoryBenchOptions mem;
    mem.first_run_index = next_run_index(layout.memory_dir());
    mem.output_dir = layout.memory_dir();
    mem.raw_dir = layout.memory_raw_dir();
    const auto records = bench_memory(ctx.registry, *source, o.config, mem);
    ctx.note("memory: {} records in {}", records.size(), layout.memory_dir().string());
}

TestPlan handshake_plan(Context& ctx, int first_run_index) {
    const auto& c = ctx.o.config;
    return make_test_plan(ctx.registry, ctx.o.sig_ids, ctx.o.kem_ids, c.tls_window_seconds, c.num_runs,
                          first_run_index);
}

void stage_tls_server(Context& ctx) {
    auto& o = ctx.o;
    if (!o.mock) config_error("the handshake server serves simulated handshakes; pass --mock");
    const auto plan = handshake_plan(ctx, 1);
    CredentialManifest manifest;
    try {
        manifest = load_manifest(o.credentials());
    } catch (const Error& e) {
        throw Error(e.code(), e.detail() + " (run gen-keys first)");
    }
    const auto providers = make_mock_providers(ctx.registry, o.seed, {.work_scale = o.mock_work_scale});
    HandshakeServerOptions options;
    options.on_listening = [&](std::uint16_t control, std::uint16_t data) {
        ctx.note("listening control={} data={} tests={}", control, data, plan.entries().size());
    };
    const auto log = run_handshake_server(o.config, providers, manifest, plan, options);
    ctx.note("server: peer={} completed={} retries={} skipped={}", log.peer_machine_id, log.completed, log.retries,
             log.skipped.size());
}

std::vector<SpeedRecord> speed_from_adapter(Context& ctx, const fs::path& dir) {
    const auto& config = ctx.o.config;
    const int first = next_run_index(dir);
    std::vector<SpeedRecord> all;
    for (int r = 0; r < config.num_runs; ++r) {
        const int run = first + r;
        for (const auto& d : ctx.registry.with_capability(Capability::Speed)) {
            const auto capture = external_adapter(ctx.o.speed_adapter, OutputKind::OpensslSpeed,
                                                  {.alg = d.id, .window = format_number(config.tls_window_seconds), .out = {}, .op = {}});
            bool found = false;
            for (auto& record : parse_openssl_speed(capture.stdout_text, run)) {
                const auto* match = ctx.registry.find(record.algorithm_id);
                if (match == nullptr || match->id != d.id) continue;
                record.algorithm_id = d.id;
                all.push_back(std::move(record));
                found = true;
            }
            if (!found) throw Error(ErrorCode::MalformedSpeedOutput, "no row for " + d.id);
            write_run_file(dir, run, all);
        }
    }
    return all;
}

void stage_speed(Context& ctx) {
    auto& o = ctx.o;
    const auto dir = ctx.layout().speed_dir();
    std::size_t count = 0;
    if (o.mock) {
        VirtualTimebase timebase;
        const auto providers = make_mock_providers(
            ctx.registry, o.seed, {.work_scale = o.mock_work_scale, .nominal_cycles_per_unit = 1000.0, .timebase = &timebase});
        SpeedBenchOptions options;
        options.first_run_index = next_run_index(dir);
        options.output_dir = dir;
        count = bench_tls_speed(ctx.registry, providers, o.config, timebase, timebase, options).size();
    } else if (!o.speed_adapter.empty()) {
        count = speed_from_adapter(ctx, dir).size();
    } else {
        ctx.note("speed: skipped (no --mock or --speed-adapter)");
        return;
    }
    ctx.note("speed: {} records in {}", count, dir.string());
}

void stage_tls_client(Context& ctx) {
    auto& o = ctx.o;
    if (!o.mock && o.adapter.empty()) config_error("no handshake backend: pass --mock or --adapter <s_time command>");
    const auto dir = ctx.layout().handshake_dir();
    const auto plan = handshake_plan(ctx, next_run_index(dir));
    const auto providers = make_mock_providers(ctx.registry, o.seed, {.work_scale = o.mock_work_scale});
    std::unique_ptr<ClientWindow> external;
    HandshakeClientOptions options;
    options.output_dir = dir;
    if (!o.mock) {
        external = std::make_unique<STimeAdapterWindow>(o.adapter);
        options.window = external.get();
    }
    const auto result = run_handshake_client(o.config, providers, plan, options);
    ctx.note("handshake: {} records in {} (retries={} skipped={})", result.records.size(), dir.string(),
             result.retries, result.skipped.size());
    for (const auto& entry : result.skipped) ctx.note("skipped {} run {}", entry.test.str(), entry.run_index);
    stage_speed(ctx);
}

void cmd_tls_bench(Context& ctx) {
    const auto& c = ctx.o.config;
    if (c.role == Role::Standalone) config_error("tls-bench needs --role server or --role client");
    c.validate();
    if (c.role == Role::Server) {
        stage_tls_server(ctx);
    } else {
        stage_tls_client(ctx);
    }
}

// Rewrites run file `run` in `dir` with `fresh` replacing records of the same identity.
template <class R, class Reader, class Same>
void merge_into_run_file(const fs::path& dir, int run, std::vector<R> fresh, Reader read, Same same) {
    const auto file = OutputLayout::run_file(dir, run);
    std::vector<R> merged;
    std::error_code ec;
    if (fs::exists(file, ec)) merged = read(read_text_file(file));
    std::erase_if(merged, [&](const R& old) {
        return std::any_of(fresh.begin(), fresh.end(), [&](const R& r) { return same(old, r); });
    });
    for (auto& r : fresh) {
        r.run_index = run;
        merged.push_back(std::move(r));
    }
    write_text_file(file, to_csv(std::span<const R>(merged)));
}

template <class R>
bool same_operation(const R& a, const R& b) {
    return a.algorithm_id == b.algorithm_id && a.operation == b.operation;
}

void cmd_parse(Context& ctx) {
    auto& o = ctx.o;
    validate_local(o.config);
    const auto layout = ctx.layout();
    const auto kind = *o.parse_kind;
    auto run_for = [&](const fs::path& dir) { return o.parse_run.value_or(next_run_index(dir)); };

    switch (kind) {
        case ParseKind::LiboqsSpeed: {
            std::vector<CpuOpRecord> records;
            for (const auto& file : o.parse_files) {
                const auto id = o.parse_algorithm.empty() ? file.stem().string() : o.parse_algorithm;
                for (auto& r : parse_liboqs_speed_csv(read_text_file(file), id)) records.push_back(std::move(r));
            }
            const int run = run_for(layout.cpu_dir());
            ctx.note("parse: {} cpu records into run {}", records.size(), run);
            merge_into_run_file(layout.cpu_dir(), run, std::move(records), read_cpu_csv, same_operation<CpuOpRecord>);
            break;
        }
        case ParseKind::OpensslSpeed: {
            std::vector<SpeedRecord> records;
            for (const auto& file : o.parse_files) {
                for (auto& r : parse_openssl_speed(read_text_file(file))) records.push_back(std::move(r));
            }
            const int run = run_for(layout.speed_dir());
            ctx.note("parse: {} speed records into run {}", records.size(), run);
            merge_into_run_file(layout.speed_dir(), run, std::move(records), read_speed_csv,
                                same_operation<SpeedRecord>);
            break;
        }
        case ParseKind::STime: {
            const auto colon = o.parse_algorithm.find(':');
            if (colon == std::string::npos || !o.parse_mode) {
                throw Error(ErrorCode::Usage, "s-time parsing needs --algorithm <sig>:<kem> and --mode");
            }
            std::vector<HandshakeRecord> records;
            for (const auto& file : o.parse_files) {
                const auto summary = parse_s_time(read_text_file(file));
                HandshakeRecord r{o.parse_algorithm.substr(0, colon), o.parse_algorithm.substr(colon + 1),
                                  *o.parse_mode, 1, summary.connections, summary.real_seconds,
                                  summary.user_connections_per_sec};
                r.validate();
                records.push_back(std::move(r));
            }
            if (records.size() != 1) throw Error(ErrorCode::Usage, "s-time parsing takes one file per invocation");
            const int run = run_for(layout.handshake_dir());
            ctx.note("parse: handshake record into run {}", run);
            merge_into_run_file(layout.handshake_dir(), run, std::move(records), read_handshake_csv,
                                [](const HandshakeRecord& a, const HandshakeRecord& b) {
                                    return a.sig_algorithm_id == b.sig_algorithm_id &&
                                           a.kem_algorithm_id == b.kem_algorithm_id && a.mode == b.mode;
                                });
            break;
        }
        case ParseKind::Massif: {
            std::vector<MemOpRecord> records;
            for (const auto& file : o.parse_files) {
                // Without flags the path names the target: <alg>/<op>.massif.
                const auto id = o.parse_algorithm.empty() ? file.parent_path().filename().string() : o.parse_algorithm;
                const auto op = o.parse_operation ? o.parse_operation : parse_operation(file.stem().string());
                if (!op) throw Error(ErrorCode::Usage, "cannot tell the operation of " + file.string());
                const auto peak = peak_memory(parse_massif(read_text_file(file)));
                MemOpRecord r{id, *op, 1, peak.heap_bytes, peak.ext_heap_bytes, peak.stack_bytes};
                r.validate();
                records.push_back(std::move(r));
            }
            const int run = run_for(layout.memory_dir());
            ctx.note("parse: {} memory records into run {}", records.size(), run);
            merge_into_run_file(layout.memory_dir(), run, std::move(records), read_mem_csv,
                                same_operation<MemOpRecord>);
            break;
        }
    }
}

/// Re-reads every run CSV of the machine so a broken file fails here, before the report.
void stage_parse_check(Context& ctx) {
    const auto raw = load_results(ctx.layout().machine_dir);
    ctx.note("parse: cpu={} memory={} handshake={} speed={}", raw.cpu.size(), raw.mem.size(), raw.handshake.size(),
             raw.speed.size());
}

void cmd_report(Context& ctx) {
    auto& o = ctx.o;
    validate_local(o.config);
    const auto input = o.input_dir.empty() ? ctx.layout().machine_dir : o.input_dir;
    const auto averaged = average_all(load_results(input));
    ReportOptions options;
    options.top_n = o.top_n;
    options.filters.prefer_standardised = o.prefer_standardised;
    options.filters.exclude_ids = o.exclude_ids;
    const auto out_dir = ctx.layout().report_dir();
    const auto summary = emit_report(averaged, ctx.registry, options, out_dir);
    for (const auto& w : summary.warnings) ctx.note("warning: {}", w);
    ctx.out << read_text_file(out_dir / "summary.md");
    ctx.note("report: {} files in {}", summary.files.size(), out_dir.string());
}

void cmd_full_run(Context& ctx) {
    const auto& c = ctx.o.config;
    c.validate();
    switch (c.role) {
        case Role::Standalone:
            stage_compute(ctx);
            break;
        case Role::Client:
            stage_tls_client(ctx);
            break;
        case Role::Server:
            stage_tls_server(ctx);
            return;
    }
    stage_parse_check(ctx);
    cmd_report(ctx);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err,
            const EnvLookup& env) {
    auto finish = [&](int code, std::string_view name) {
        err << "status=" << (code == 0 ? "ok" : "error") << " code=" << name << std::endl;
        return code;
    };
    try {
        auto parsed = parse_cli(args, env, out);
        if (!parsed) return finish(0, "OK");
        auto& o = *parsed;
        if (o.interactive) ask_interactively(o, in, out);
        Context ctx{o, out, err, load_selected_registry(o)};
        switch (o.command) {
            case Command::GenKeys:
                cmd_gen_keys(ctx);
                break;
            case Command::ComputeBench:
                stage_compute(ctx);
                break;
            case Command::TlsBench:
                cmd_tls_bench(ctx);
                break;
            case Command::Parse:
                cmd_parse(ctx);
                break;
            case Command::Report:
                cmd_report(ctx);
                break;
            case Command::FullRun:
                cmd_full_run(ctx);
                break;
        }
        return finish(0, "OK");
    } catch (const Error& e) {
        err << "pqbench: error: " << e.what() << '\n';
        return finish(exit_code_for(e.code()), to_string(e.code()));
    } catch (const std::exception& e) {
        err << "pqbench: internal error: " << e.what() << '\n';
        return finish(2, "INTERNAL");
    }
}

}  // namespace pqbench
