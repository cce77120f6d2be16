#pragma once

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "uavsfc/schemes.hpp"

// Experiment plumbing: single runs, replicated sweeps, and the CSV / dump
// renderers the command-line tool writes out. Every figure is reproducible
// from (scenario, seed) alone; the sweep drivers reuse the same seed list for
// every scheme so comparisons are paired, not merely sampled alike.

namespace uavsfc {

struct RunArtifacts {
    ScenarioConfig cfg;  // normalized
    std::vector<TaskResult> tasks;
    std::string trace_text;
    std::string ledger_text;  // canonical replica: lexicographically first ES
    double offered_rate_per_s{0.0};
};

inline RunArtifacts run_scenario(const ScenarioConfig& cfg) {
    World w(cfg);
    WorkloadPlan plan = build_workload(w.cfg, w.built);
    RunArtifacts out;
    out.tasks = run_plan(w, plan);
    out.cfg = w.cfg;
    out.trace_text = w.trace.text();
    out.ledger_text = dump_chain(w.ledger.replica(w.first_es()));
    out.offered_rate_per_s = plan.offered_rate_per_s;
    return out;
}

// Latency statistics cover every completed task; throughput counts only the
// completions that land inside [warmup, warmup + duration], so ramp-up noise
// and post-horizon stragglers don't inflate the rate.
struct RunSummary {
    std::size_t tasks{0};
    std::size_t completed{0};
    std::size_t aborted{0};
    std::size_t completed_in_window{0};
    double mean_latency_ms{0.0};
    double stddev_latency_ms{0.0};
    double throughput_per_s{0.0};
};

inline RunSummary summarize(const std::vector<TaskResult>& tasks, const WorkloadSpec& w) {
    RunSummary s;
    s.tasks = tasks.size();
    double sum = 0.0, sumsq = 0.0;
    for (const auto& t : tasks) {
        if (!t.completed) {
            ++s.aborted;
            continue;
        }
        ++s.completed;
        const double lat = double(*t.latency_ms());
        sum += lat;
        sumsq += lat * lat;
        if (*t.completed_at >= w.warmup_ms && *t.completed_at <= w.warmup_ms + w.duration_ms)
            ++s.completed_in_window;
    }
    if (s.completed > 0) {
        const double n = double(s.completed);
        s.mean_latency_ms = sum / n;
        const double var = std::max(0.0, sumsq / n - s.mean_latency_ms * s.mean_latency_ms);
        s.stddev_latency_ms = std::sqrt(var);
    }
    s.throughput_per_s = double(s.completed_in_window) / (double(w.duration_ms) / 1000.0);
    return s;
}

// One cell of a sweep: a scheme at a sweep point under one seed.
struct SweepRun {
    SchemeId scheme{SchemeId::Proposed};
    std::int64_t sweep{-1};  // chain length or fleet size; -1 for single runs
    std::uint64_t seed{0};
    WorkloadSpec workload;   // the window this run was measured against
    std::vector<TaskResult> tasks;
    RunSummary summary;
};

inline constexpr SchemeId kAllSchemes[] = {SchemeId::Proposed, SchemeId::CentralizedTa,
                                           SchemeId::StaticConfig};

namespace detail {

inline SweepRun run_cell(ScenarioConfig cfg, SchemeId scheme, std::int64_t sweep,
                         std::uint64_t seed) {
    cfg.scheme = scheme;
    cfg.seed = seed;
    RunArtifacts art = run_scenario(cfg);
    SweepRun cell;
    cell.scheme = scheme;
    cell.sweep = sweep;
    cell.seed = seed;
    cell.workload = art.cfg.workload;
    cell.summary = summarize(art.tasks, art.cfg.workload);
    cell.tasks = std::move(art.tasks);
    return cell;
}

inline std::string fmt6(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(6) << v;
    return out.str();
}

}  // namespace detail

// Chain-length sweep: same topology, same rate, same seeds per point; only
// the requested SFC length moves.
inline std::vector<SweepRun> sweep_latency(const ScenarioConfig& base,
                                           const std::vector<int>& lengths) {
    std::vector<SweepRun> out;
    for (int len : lengths) {
        if (len < 1) throw ConfigError("sweep.lengths", "chain length must be at least 1");
        ScenarioConfig cfg = base;
        cfg.workload.sfc_length = len;
        for (SchemeId scheme : kAllSchemes)
            for (int r = 0; r < base.replicas; ++r)
                out.push_back(detail::run_cell(cfg, scheme, len, base.seed + std::uint64_t(r)));
    }
    return out;
}

// Fleet-size sweep: domains scale up at a fixed per-domain UAV count, so the
// offered load (rate_per_uav_per_s x fleet) grows with the x-axis.
inline std::vector<SweepRun> sweep_throughput(const ScenarioConfig& base,
                                              const std::vector<int>& uav_counts) {
    std::vector<SweepRun> out;
    for (int count : uav_counts) {
        const int upd = base.topology.uavs_per_domain;
        if (count < upd || count % upd != 0)
            throw ConfigError("sweep.uavs", "fleet size " + std::to_string(count) +
                                                " is not a multiple of uavs_per_domain (" +
                                                std::to_string(upd) + ")");
        ScenarioConfig cfg = base;
        cfg.topology.domains = count / upd;
        for (SchemeId scheme : kAllSchemes)
            for (int r = 0; r < base.replicas; ++r)
                out.push_back(detail::run_cell(cfg, scheme, count, base.seed + std::uint64_t(r)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV renderers. Both files start with a format tag line, then a header row.

inline std::string render_tasks_csv(const std::vector<SweepRun>& runs) {
    std::string out = "# uavsfc-tasks v1\n";
    out += "scheme,sweep,seed,task_id,initiated_ms,latency_ms,outcome,hops,abort_reason\n";
    for (const auto& run : runs)
        for (const auto& t : run.tasks) {
            out += scheme_name(run.scheme);
            out += ',' + std::to_string(run.sweep);
            out += ',' + std::to_string(run.seed);
            out += ',' + t.task_id;
            out += ',' + std::to_string(t.initiated_at);
            out += ',';
            if (auto lat = t.latency_ms()) out += std::to_string(*lat);
            out += t.completed ? ",completed" : ",aborted";
            out += ',' + std::to_string(t.hops);
            out += ',' + t.abort_reason;  // single token by construction
            out += '\n';
        }
    return out;
}

// Per-seed rows, then one "all" row per (scheme, sweep) pooling every seed:
// counts are summed, latency moments are recomputed over the pooled
// completions, and throughput is pooled completions over pooled window time.
inline std::string render_summary_csv(const std::vector<SweepRun>& runs) {
    std::string out = "# uavsfc-summary v1\n";
    out +=
        "scheme,sweep,seed,tasks,completed,aborted,mean_latency_ms,stddev_latency_ms,"
        "throughput_per_s\n";

    auto row = [&](const std::string& scheme, std::int64_t sweep, const std::string& seed,
                   std::size_t tasks, std::size_t completed, std::size_t aborted, double mean,
                   double stddev, double tput) {
        out += scheme + ',' + std::to_string(sweep) + ',' + seed + ',' + std::to_string(tasks) +
               ',' + std::to_string(completed) + ',' + std::to_string(aborted) + ',' +
               detail::fmt6(mean) + ',' + detail::fmt6(stddev) + ',' + detail::fmt6(tput) + '\n';
    };

    struct Pool {
        std::size_t tasks{0}, completed{0}, aborted{0}, in_window{0};
        double sum{0}, sumsq{0}, window_s{0};
    };
    std::map<std::pair<std::string, std::int64_t>, Pool> pools;

    for (const auto& run : runs) {
        const auto& s = run.summary;
        row(scheme_name(run.scheme), run.sweep, std::to_string(run.seed), s.tasks, s.completed,
            s.aborted, s.mean_latency_ms, s.stddev_latency_ms, s.throughput_per_s);
        Pool& p = pools[{scheme_name(run.scheme), run.sweep}];
        p.tasks += s.tasks;
        p.completed += s.completed;
        p.aborted += s.aborted;
        p.in_window += s.completed_in_window;
        p.window_s += double(run.workload.duration_ms) / 1000.0;
        for (const auto& t : run.tasks)
            if (auto lat = t.latency_ms()) {
                p.sum += double(*lat);
                p.sumsq += double(*lat) * double(*lat);
            }
    }
    for (const auto& [key, p] : pools) {
        double mean = 0.0, stddev = 0.0;
        if (p.completed > 0) {
            mean = p.sum / double(p.completed);
            stddev = std::sqrt(std::max(0.0, p.sumsq / double(p.completed) - mean * mean));
        }
        double tput = p.window_s > 0 ? double(p.in_window) / p.window_s : 0.0;
        row(key.first, key.second, "all", p.tasks, p.completed, p.aborted, mean, stddev, tput);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Audit reconstruction from a chain dump: parse, verify integrity, then
// regroup the attested steps per task in event-time order. Exit codes:
// 0 clean (including "no tasks"), 1 broken chain, 2 unparseable input.

struct AuditDump {
    std::string text;
    int exit_code{0};
};

inline AuditDump render_audit_dump(const std::string& ledger_text) {
    ParsedDump dump;
    try {
        dump = parse_dump(ledger_text);
    } catch (const DumpParseError& e) {
        return {std::string("error\tparse\t") + e.what() + "\n", 2};
    }
    if (auto broken = verify_dump(dump))
        return {"error\tbroken-chain\theight=" + std::to_string(*broken) + "\n", 1};

    std::map<TaskId, std::vector<AuditEntry>> by_task;
    for (const auto& b : dump.blocks)
        for (const auto& rec : b.records) {
            if (rec.kind != RecordKind::AuditEvent) continue;
            auto decoded = decode_audit_entry(rec.payload);
            if (!decoded)
                return {"error\tparse\tundecodable audit record at height " +
                            std::to_string(b.height) + "\n",
                        2};
            by_task[decoded->first].push_back(decoded->second);
        }

    std::string out = "# uavsfc-audit v1\n";
    if (by_task.empty()) {
        out += "no tasks\n";
        return {out, 0};
    }
    for (auto& [task, entries] : by_task) {
        // Entries carry their own event times, so ordering survives however
        // consensus interleaved the submissions.
        std::stable_sort(entries.begin(), entries.end(),
                         [](const AuditEntry& a, const AuditEntry& b) {
                             return std::tie(a.at, a.hop_index) < std::tie(b.at, b.hop_index);
                         });
        out += "task " + task + "\n";
        for (const auto& e : entries) {
            out += "  at=" + std::to_string(e.at) + " " + std::string(audit_op_name(e.op)) +
                   " actor=" + e.actor + " peer=" + e.peer +
                   " hop=" + std::to_string(e.hop_index);
            if (!e.note.empty()) out += " note=" + e.note;
            out += "\n";
        }
    }
    return {out, 0};
}

}  // namespace uavsfc
