// Command-line front end: run one scenario, sweep SFC length or fleet size
// across all three authorization schemes, or rebuild the audit trail from a
// ledger dump. Outputs are plain files; exit codes are 0 ok, 1 broken audit
// chain, 2 bad input (config or arguments), 3 internal failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "uavsfc/harness.hpp"

namespace fs = std::filesystem;
using namespace uavsfc;

namespace {

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!(out << text)) throw std::runtime_error("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("ledger", "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Sweep points come either as an explicit list ("2,4,6,8") or an inclusive
// range with step ("10:100:10").
std::vector<int> parse_points(const std::string& text, const std::string& flag) {
    std::vector<int> out;
    try {
        if (text.find(':') != std::string::npos) {
            std::istringstream in(text);
            std::string a, b, c;
            if (!std::getline(in, a, ':') || !std::getline(in, b, ':') ||
                !std::getline(in, c) || c.find(':') != std::string::npos)
                throw std::invalid_argument("want start:stop:step");
            int start = std::stoi(a), stop = std::stoi(b), step = std::stoi(c);
            if (step <= 0) throw std::invalid_argument("step must be positive");
            if (start > stop) throw std::invalid_argument("start exceeds stop");
            for (int v = start; v <= stop; v += step) out.push_back(v);
        } else {
            std::istringstream in(text);
            std::string item;
            while (std::getline(in, item, ','))
                out.push_back(std::stoi(item));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(flag, std::string(e.what()) + " in '" + text + "'");
    }
    if (out.empty()) throw ConfigError(flag, "no sweep points in '" + text + "'");
    return out;
}

ScenarioConfig load_with_overrides(const std::string& config_path,
                                   const std::optional<std::uint64_t>& seed,
                                   const std::string& scheme) {
    ScenarioConfig cfg = load_scenario(config_path);
    if (seed) cfg.seed = *seed;
    if (!scheme.empty()) {
        auto s = scheme_from(scheme);
        if (!s)
            throw ConfigError("scheme", "unknown scheme '" + scheme +
                                            "' (proposed, centralized-ta, static-config)");
        cfg.scheme = *s;
    }
    cfg.validate();
    return cfg;
}

void write_sweep_outputs(const fs::path& dir, const std::vector<SweepRun>& runs) {
    fs::create_directories(dir);
    write_file(dir / "tasks.csv", render_tasks_csv(runs));
    write_file(dir / "summary.csv", render_summary_csv(runs));
    std::size_t tasks = 0;
    for (const auto& r : runs) tasks += r.tasks.size();
    std::cout << "wrote " << (dir / "tasks.csv").string() << " (" << tasks << " tasks, "
              << runs.size() << " runs)\n"
              << "wrote " << (dir / "summary.csv").string() << "\n";
}

int run_command(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                const std::string& scheme, const fs::path& out_dir) {
    ScenarioConfig cfg = load_with_overrides(config_path, seed, scheme);
    RunArtifacts art = run_scenario(cfg);

    SweepRun run;
    run.scheme = cfg.scheme;
    run.seed = cfg.seed;
    run.workload = cfg.workload;
    run.tasks = art.tasks;
    run.summary = summarize(art.tasks, cfg.workload);

    fs::create_directories(out_dir);
    write_file(out_dir / "tasks.csv", render_tasks_csv({run}));
    write_file(out_dir / "summary.csv", render_summary_csv({run}));
    write_file(out_dir / "trace.txt", art.trace_text);
    write_file(out_dir / "ledger.txt", art.ledger_text);

    const RunSummary& s = run.summary;
    std::cout << "scheme=" << scheme_name(cfg.scheme) << " seed=" << cfg.seed
              << " tasks=" << s.tasks << " completed=" << s.completed
              << " aborted=" << s.aborted << " mean_latency_ms=" << s.mean_latency_ms
              << " throughput_per_s=" << s.throughput_per_s << "\n"
              << "wrote tasks.csv summary.csv trace.txt ledger.txt under "
              << out_dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic cross-domain SFC authorization simulator"};
    app.require_subcommand(1);

    std::string config_path, scheme, points, ledger_path, out_dir;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "run one scenario and write its artifacts");
    run->add_option("--config", config_path, "scenario JSON")->required();
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--scheme", scheme, "proposed | centralized-ta | static-config");
    run->add_option("--out", out_dir, "output directory")->required();

    auto* lat = app.add_subcommand(
        "sweep-latency", "run every scheme across a list of chain lengths");
    lat->add_option("--config", config_path, "scenario JSON")->required();
    lat->add_option("--lengths", points, "chain lengths, e.g. 2,4,6,8 or 2:10:2")
        ->required();
    lat->add_option("--seed", seed, "override the base seed");
    lat->add_option("--out", out_dir, "output directory")->required();

    auto* tput = app.add_subcommand(
        "sweep-throughput", "run every scheme across a list of fleet sizes");
    tput->add_option("--config", config_path, "scenario JSON")->required();
    tput->add_option("--uavs", points,
                     "total UAV counts (multiples of uavs_per_domain), e.g. 10:100:10")
        ->required();
    tput->add_option("--seed", seed, "override the base seed");
    tput->add_option("--out", out_dir, "output directory")->required();

    auto* audit = app.add_subcommand(
        "audit-dump", "verify a ledger dump and print its audit trail");
    audit->add_option("--ledger", ledger_path, "ledger dump file")->required();

    try {
        app.parse(argc, argv);

        if (run->parsed()) return run_command(config_path, seed, scheme, out_dir);
        if (lat->parsed()) {
            ScenarioConfig cfg = load_with_overrides(config_path, seed, "");
            std::vector<int> lengths = parse_points(points, "lengths");
            write_sweep_outputs(out_dir, sweep_latency(cfg, lengths));
            return 0;
        }
        if (tput->parsed()) {
            ScenarioConfig cfg = load_with_overrides(config_path, seed, "");
            std::vector<int> counts = parse_points(points, "uavs");
            write_sweep_outputs(out_dir, sweep_throughput(cfg, counts));
            return 0;
        }
        AuditDump dump = render_audit_dump(read_file(ledger_path));
        (dump.exit_code == 0 ? std::cout : std::cerr) << dump.text;
        return dump.exit_code;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "error\tconfig\t" << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error\tinternal\t" << e.what() << "\n";
        return 3;
    }
}
