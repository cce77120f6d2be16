#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "uavsfc/harness.hpp"

// End-to-end gates over the shipped behavior: each case prints one
// "ACCEPT <n> PASS|FAIL" line so a log scrape sees the verdicts even when the
// assertion details scroll by. Sweep dimensions and tolerances are pinned
// here, next to the measurement that justifies them.

using namespace uavsfc;

namespace {

struct Gate {
    int id;
    bool ok{true};
    int live_exceptions{std::uncaught_exceptions()};
    void note(bool v) { ok = ok && v; }
    ~Gate() {
        if (std::uncaught_exceptions() > live_exceptions) ok = false;
        std::printf("ACCEPT %d %s\n", id, ok ? "PASS" : "FAIL");
        std::fflush(stdout);
    }
};

void gate_check(Gate& g, bool v, const std::string& what) {
    g.note(v);
    if (!v) UNSCOPED_INFO(what);
    CHECK(v);
}

// ---- shared chain-length sweep (gates 1 and 2) ----

// Ring of 12 domains, light open-loop load, one-domain locality: placement
// of each task's home cluster is random, so a fixed orchestrator is well or
// badly placed by luck while election tracks the cluster.
const std::vector<SweepRun>& length_sweep() {
    static const std::vector<SweepRun> runs = [] {
        ScenarioConfig base;
        base.seed = 42;
        base.replicas = 50;
        base.topology = {"ring", 12, 5, 10};
        base.workload.rate_per_s = 2;
        base.workload.duration_ms = 6000;
        base.workload.locality_radius = 1;
        return sweep_latency(base, {2, 4, 6, 8, 10});
    }();
    return runs;
}

struct Moments {
    std::size_t n{0};
    double sum{0}, sumsq{0};
    void add(double v) {
        ++n;
        sum += v;
        sumsq += v * v;
    }
    double mean() const { return n ? sum / double(n) : 0.0; }
    double stddev() const {
        if (!n) return 0.0;
        return std::sqrt(std::max(0.0, sumsq / double(n) - mean() * mean()));
    }
};

std::map<std::pair<SchemeId, std::int64_t>, Moments> pooled_latency(
    const std::vector<SweepRun>& runs) {
    std::map<std::pair<SchemeId, std::int64_t>, Moments> out;
    for (const auto& run : runs)
        for (const auto& t : run.tasks)
            if (auto lat = t.latency_ms()) out[{run.scheme, run.sweep}].add(double(*lat));
    return out;
}

// ---- trace helpers (gates 5 and 9) ----

struct TraceLine {
    VirtualTime at{0};
    std::string actor, event, detail;
};

std::vector<TraceLine> parse_trace(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    REQUIRE(std::getline(in, line));
    REQUIRE(line == "# uavsfc-trace v1");
    std::vector<TraceLine> out;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::size_t start = 0;
        for (std::size_t tab = line.find('\t'); true; tab = line.find('\t', start)) {
            f.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        REQUIRE(f.size() == 5);
        out.push_back({std::stoll(f[0]), f[2], f[3], f[4]});
    }
    return out;
}

// "t00007 hop=3 ..." -> 3 when the line belongs to the task, else nullopt.
std::optional<int> hop_of(const TraceLine& l, const TaskId& task) {
    if (l.detail.rfind(task + " ", 0) != 0) return std::nullopt;
    auto p = l.detail.find("hop=");
    if (p == std::string::npos) return std::nullopt;
    return std::stoi(l.detail.substr(p + 4));
}

}  // namespace

TEST_CASE("mean authorization latency stays ordered across chain lengths") {
    Gate gate{1};
    auto pooled = pooled_latency(length_sweep());
    const std::vector<std::int64_t> lengths{2, 4, 6, 8, 10};

    std::map<SchemeId, double> prev;
    for (std::int64_t len : lengths) {
        const double prop = pooled[{SchemeId::Proposed, len}].mean();
        const double stat = pooled[{SchemeId::StaticConfig, len}].mean();
        const double cta = pooled[{SchemeId::CentralizedTa, len}].mean();
        CAPTURE(len, prop, stat, cta);
        gate_check(gate, prop < stat, "proposed below static at this length");
        gate_check(gate, stat < cta, "static below centralized-ta at this length");
        for (SchemeId s : kAllSchemes) {
            const double mean = pooled[{s, len}].mean();
            if (prev.count(s))
                gate_check(gate, mean >= prev[s], "mean latency nondecreasing in length");
            prev[s] = mean;
        }
    }
}

TEST_CASE("latency spread under random placement beats the static baseline") {
    Gate gate{2};
    auto pooled = pooled_latency(length_sweep());
    const double prop = pooled[{SchemeId::Proposed, 6}].stddev();
    const double stat = pooled[{SchemeId::StaticConfig, 6}].stddev();
    CAPTURE(prop, stat);
    gate_check(gate, pooled[{SchemeId::Proposed, 6}].n >= 500, "enough samples pooled");
    gate_check(gate, prop <= stat, "proposed latency stddev within static's at length 6");
}

TEST_CASE("completion throughput scales while both baselines saturate") {
    Gate gate{3};
    // Per-UAV demand of 5/s pushes the authority past its service rate from
    // 40 UAVs up (five 1 ms verifications per task against one queue), while
    // per-domain demand stays well inside one edge server's budget, so the
    // election-routed scheme keeps absorbing the load.
    ScenarioConfig base;
    base.seed = 2026;
    base.topology = {"ring", 4, 10, 10};
    base.consensus.batch_size = 64;
    base.workload.rate_per_uav_per_s = 5;
    base.workload.sfc_length = 5;
    base.workload.duration_ms = 6000;
    base.workload.warmup_ms = 2000;

    std::vector<int> counts;
    for (int c = 10; c <= 100; c += 10) counts.push_back(c);
    auto runs = sweep_throughput(base, counts);

    std::map<std::pair<SchemeId, std::int64_t>, double> tput;
    for (const auto& r : runs) tput[{r.scheme, r.sweep}] = r.summary.throughput_per_s;

    // Completion-window counting quantizes at the window edges: a latency
    // difference shifts a handful of boundary tasks in or out, so schemes
    // tied at offered load can differ by a few tasks either way. 1.5 tasks/s
    // (nine tasks across the 6 s window) bounds that noise; the saturation
    // gaps this gate is about run past 17 tasks/s.
    const double slack = 1.5;
    for (int c : counts) {
        const double prop = tput[{SchemeId::Proposed, c}];
        const double stat = tput[{SchemeId::StaticConfig, c}];
        const double cta = tput[{SchemeId::CentralizedTa, c}];
        CAPTURE(c, prop, stat, cta);
        gate_check(gate, prop + slack >= stat, "proposed >= static within edge noise");
        gate_check(gate, stat + slack >= cta, "static >= centralized-ta within edge noise");
        if (c >= 50) {
            gate_check(gate, prop > stat, "proposed strictly ahead once saturated");
            gate_check(gate, stat > cta, "static strictly ahead once saturated");
        }
    }

    const double cta50 = tput[{SchemeId::CentralizedTa, 50}];
    const double cta100 = tput[{SchemeId::CentralizedTa, 100}];
    const double prop50 = tput[{SchemeId::Proposed, 50}];
    const double prop100 = tput[{SchemeId::Proposed, 100}];
    CAPTURE(cta50, cta100, prop50, prop100);
    gate_check(gate, cta100 - cta50 < 0.10 * cta50, "authority curve flat past 50 UAVs");
    gate_check(gate, prop100 > 1.25 * prop50, "proposed still growing past 50 UAVs");
}

namespace {

// ---- randomized election instances and an independent argmax (gate 4) ----

struct ElectionInstance {
    std::vector<NodeId> es_ids;
    std::vector<EsTopology::Link> links;
    std::vector<DomainDescriptor> domains;
    SfcRequest req;
};

ElectionInstance random_election(Rng& rng) {
    ElectionInstance inst;
    const int n = 3 + int(rng.below(6));
    for (int i = 0; i < n; ++i) {
        NodeId es = "es" + std::to_string(i);
        inst.es_ids.push_back(es);
        DomainDescriptor d;
        d.domain_id = "d" + std::to_string(i);
        d.es_id = es;
        for (int u = 0, nu = 1 + int(rng.below(3)); u < nu; ++u)
            d.uav_ids.insert("u" + std::to_string(i) + "-" + std::to_string(u));
        inst.domains.push_back(d);
    }
    for (int i = 1; i < n; ++i)
        inst.links.push_back(
            {inst.es_ids[i - 1], inst.es_ids[i], std::int64_t(5 + rng.below(20))});
    for (int e = 0, ne = int(rng.below(std::uint64_t(n))); e < ne; ++e) {
        int a = int(rng.below(std::uint64_t(n))), b = int(rng.below(std::uint64_t(n)));
        if (a != b)
            inst.links.push_back(
                {inst.es_ids[a], inst.es_ids[b], std::int64_t(5 + rng.below(20))});
    }
    inst.req.task_id = "t-accept";
    inst.req.requester_id = "r";
    for (int h = 0, nh = 1 + int(rng.below(7)); h < nh; ++h) {
        const auto& d = inst.domains[rng.below(std::uint64_t(n))];
        std::vector<NodeId> uavs(d.uav_ids.begin(), d.uav_ids.end());
        inst.req.hops.push_back(
            {uavs[rng.below(uavs.size())], d.domain_id, "f" + std::to_string(h)});
    }
    return inst;
}

// Scores rebuilt from first principles on __int128 cross-multiplied
// fractions, sharing nothing with the library's Rational path.
struct Frac {
    __int128 num{0}, den{1};
};
bool frac_less(const Frac& a, const Frac& b) { return a.num * b.den < b.num * a.den; }
bool frac_eq(const Frac& a, const Frac& b) { return a.num * b.den == b.num * a.den; }

NodeId argmax_winner(const ElectionInstance& inst, const EsTopology& topo) {
    std::map<DomainId, std::int64_t> weight;
    std::map<DomainId, NodeId> es_of;
    for (const auto& d : inst.domains) es_of[d.domain_id] = d.es_id;
    std::set<NodeId> cands;
    for (const auto& hop : inst.req.hops) {
        ++weight[hop.domain_id];
        cands.insert(es_of[hop.domain_id]);
    }

    NodeId best;
    Frac best_score{-1, 1};
    for (const auto& cand : cands) {
        __int128 cn = 0, cd = 1, total = 0;
        for (const auto& [dom, w] : weight) {
            __int128 d = 1 + topo.hop_distance(cand, es_of[dom]);
            cn = cn * d + __int128(w) * cd;
            cd *= d;
            total += w;
        }
        const DomainDescriptor* own = nullptr;
        for (const auto& d : inst.domains)
            if (d.es_id == cand) own = &d;
        std::set<NodeId> distinct;
        __int128 managed = 0;
        for (const auto& hop : inst.req.hops)
            if (distinct.insert(hop.uav_id).second && own->uav_ids.count(hop.uav_id))
                ++managed;
        // composite at alpha = beta = 1/2: (centrality + coverage) / 2.
        __int128 dd = __int128(distinct.size());
        Frac s{cn * dd + managed * cd * total, 2 * cd * total * dd};
        if (best.empty() || frac_less(best_score, s) ||
            (frac_eq(best_score, s) && cand < best)) {
            best = cand;
            best_score = s;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("distributed election matches a brute-force argmax on random instances") {
    Gate gate{4};

    // Hand value first: a 3-server line with hop weights {1, 2, 1} puts the
    // middle server's inverse-distance score at (1/2 + 2 + 1/2) / 4.
    EsTopology line({"es1", "es2", "es3"}, {{"es1", "es2", 10}, {"es2", "es3", 10}});
    std::vector<DomainDescriptor> line_domains{{"d1", "es1", {"u1"}},
                                               {"d2", "es2", {"u2", "u2b"}},
                                               {"d3", "es3", {"u3"}}};
    SfcRequest line_req;
    line_req.task_id = "t-line";
    line_req.requester_id = "u1";
    line_req.hops = {{"u1", "d1", "f0"}, {"u2", "d2", "f1"}, {"u2b", "d2", "f2"},
                     {"u3", "d3", "f3"}};
    gate_check(gate, centrality("es2", line_req, line, line_domains) == Rational(3, 4),
               "line-fixture centrality is exactly 3/4");

    Rng rng(4242);
    int agreed = 0;
    for (int trial = 0; trial < 200; ++trial) {
        ElectionInstance inst = random_election(rng);
        EsTopology topo(inst.es_ids, inst.links);
        const NodeId expect = argmax_winner(inst, topo);

        // The trigger is whichever server first saw the request — not
        // necessarily a candidate, so the fan-out leg is part of the window.
        const NodeId trigger = inst.domains[0].es_id;
        ElectionOutcome central =
            run_election(inst.req, inst.domains, topo, ElectionParams{}, trigger, 0);

        Simulator sim;
        for (const auto& es : inst.es_ids) sim.register_node(es, Role::EdgeServer, "d-" + es);
        sim.set_topology(&topo);
        std::map<NodeId, ElectionOutcome> decided;
        auto election = DistributedElection::start(
            sim, topo, inst.domains, inst.req, ElectionParams{}, trigger,
            [&](const NodeId& cand, const ElectionOutcome& out) { decided[cand] = out; });
        sim.run();

        bool all_agree = central.winner_es == expect &&
                         decided.size() == election->candidates().size();
        for (const auto& [cand, out] : decided)
            all_agree = all_agree && out.winner_es == expect &&
                        out.decided_at == central.decided_at;
        if (all_agree) ++agreed;
        CAPTURE(trial, expect, central.winner_es);
        CHECK(all_agree);
    }
    gate_check(gate, agreed == 200, "all 200 randomized instances agree");
}

namespace {

// ---- adversary runs (gate 5) ----

ScenarioConfig attack_scenario(const std::string& kind, std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.topology = {"ring", 4, 3, 10};
    cfg.workload.rate_per_s = 8;
    cfg.workload.sfc_length = 3 + int(seed % 3);
    cfg.workload.duration_ms = 1500;
    cfg.attack = {kind, 1.0};
    return cfg;
}

}  // namespace

TEST_CASE("credential attacks never authorize past the attack point") {
    Gate gate{5};
    std::size_t attacked = 0, mid_protocol = 0;

    for (const std::string kind : {"tamper", "replay", "impersonate", "unregistered"}) {
        for (std::uint64_t run = 0; run < 100; ++run) {
            ScenarioConfig cfg = attack_scenario(kind, 9000 + run);
            // Regenerate the plan the run used so every task's attack point
            // is known independently of how the run ended.
            ScenarioConfig norm = cfg.normalized();
            norm.validate();
            WorkloadPlan plan = build_workload(norm, build_topology(norm.topology));
            RunArtifacts art = run_scenario(cfg);
            REQUIRE(plan.tasks.size() == art.tasks.size());

            for (std::size_t i = 0; i < art.tasks.size(); ++i) {
                const TaskResult& t = art.tasks[i];
                REQUIRE(plan.tasks[i].req.task_id == t.task_id);
                if (!plan.tasks[i].attack) continue;
                ++attacked;
                const int point = plan.tasks[i].attack->hop_index;
                CAPTURE(kind, run, t.task_id, point, t.abort_reason);
                gate_check(gate, !t.completed, "attacked task must not complete");
                if (kind == "unregistered") {
                    gate_check(gate, t.hop_verified.empty(),
                               "no grant at all when one hop identity is unregistered");
                    gate_check(gate, t.abort_reason.rfind("pre-verification", 0) == 0,
                               "rejected before issuance");
                } else {
                    gate_check(gate, int(t.hop_verified.size()) == point,
                               "grants stop exactly at the attack point");
                    if (point >= 1) ++mid_protocol;
                }
            }
        }
    }
    // The sweep must actually exercise mid-chain interceptions, not only
    // first-credential rejections.
    CAPTURE(attacked, mid_protocol);
    gate_check(gate, attacked >= 400, "every class contributed attacked tasks");
    gate_check(gate, mid_protocol >= 100, "plenty of interceptions landed mid-chain");
}

TEST_CASE("a four-replica ledger commits through crashes and flags every tamper") {
    Gate gate{6};
    const std::vector<NodeId> es{"esa", "esb", "esc", "esd"};
    const std::vector<EsTopology::Link> links{
        {"esa", "esb", 10}, {"esb", "esc", 10}, {"esc", "esd", 10}, {"esd", "esa", 10}};

    // One silent replica, five hundred records: the three live replicas must
    // agree byte for byte and every submission must get its receipt.
    {
        Simulator sim(FailureScript{{"esd", 0, std::nullopt}});
        for (const auto& id : es) sim.register_node(id, Role::EdgeServer, "d-" + id);
        EsTopology topo(es, links);
        sim.set_topology(&topo);
        ConsortiumLedger ledger(sim, topo, {1, 0, 8});
        ledger.install_genesis({});
        gate_check(gate, ledger.quorum() == 3, "fault budget of one needs a quorum of three");

        int committed = 0, failed = 0;
        for (int i = 0; i < 500; ++i) {
            sim.schedule(i, "", [&sim, &ledger, i, &committed, &failed] {
                auto rec = make_record(RecordKind::AuditEvent,
                                       bytes_of("rec-" + std::to_string(i)), sim.now());
                ledger.submit(rec, "esb", [&committed, &failed](SubmitResult r) {
                    (std::holds_alternative<CommitReceipt>(r) ? committed : failed)++;
                });
            });
        }
        sim.run();
        CAPTURE(committed, failed);
        gate_check(gate, committed == 500, "all 500 submissions committed");
        gate_check(gate, failed == 0, "no submission reported failure");

        const std::string a = dump_chain(ledger.replica("esa"));
        gate_check(gate, a == dump_chain(ledger.replica("esb")), "esa and esb chains equal");
        gate_check(gate, a == dump_chain(ledger.replica("esc")), "esa and esc chains equal");
        gate_check(gate, !verify_dump(parse_dump(a)).has_value(), "surviving chain verifies");
    }

    // Single-bit fuzz over a fifty-block dump: every flip must surface as a
    // parse rejection or a broken-chain height.
    {
        Simulator sim;
        for (const auto& id : es) sim.register_node(id, Role::EdgeServer, "d-" + id);
        EsTopology topo(es, links);
        sim.set_topology(&topo);
        ConsortiumLedger ledger(sim, topo, {1, 0, 1});
        ledger.install_genesis({});
        for (int i = 0; i < 50; ++i)
            sim.schedule(1 + 5 * i, "", [&sim, &ledger, i] {
                auto rec = make_record(RecordKind::AuditEvent,
                                       bytes_of("blk-" + std::to_string(i)), sim.now());
                ledger.submit(rec, "esa", [](SubmitResult) {});
            });
        sim.run();
        const std::string dump = dump_chain(ledger.replica("esa"));
        gate_check(gate, parse_dump(dump).blocks.size() == 51, "fifty blocks plus genesis");

        Rng rng(606);
        int detected = 0;
        const int flips = 600;
        for (int i = 0; i < flips; ++i) {
            std::string bent = dump;
            std::size_t pos = i == 0 ? 0 : i == 1 ? bent.size() - 1 : rng.below(bent.size());
            bent[pos] = char(bent[pos] ^ (1 << rng.below(8)));
            bool caught = false;
            try {
                caught = verify_dump(parse_dump(bent)).has_value();
            } catch (const DumpParseError&) {
                caught = true;
            }
            if (caught) ++detected;
            else {
                CAPTURE(pos, i);
                CHECK(caught);
            }
        }
        CAPTURE(detected);
        gate_check(gate, detected == flips, "every single-bit tamper detected");
    }

    // Crash the first primary: consensus must rotate exactly once and commit.
    {
        Simulator sim(FailureScript{{"esa", 0, std::nullopt}});
        for (const auto& id : es) sim.register_node(id, Role::EdgeServer, "d-" + id);
        EsTopology topo(es, links);
        sim.set_topology(&topo);
        ConsortiumLedger ledger(sim, topo, {1, 0, 1});
        ledger.install_genesis({});

        bool committed = false;
        auto rec = make_record(RecordKind::AuditEvent, bytes_of("after-rotation"), 0);
        ledger.submit(rec, "esb", [&committed](SubmitResult r) {
            committed = std::holds_alternative<CommitReceipt>(r);
        });
        sim.run();
        gate_check(gate, committed, "record commits despite the dead primary");
        for (const NodeId& id : {NodeId("esb"), NodeId("esc"), NodeId("esd")}) {
            CAPTURE(id, ledger.replica(id).view);
            gate_check(gate, ledger.replica(id).view == 1, "exactly one view rotation");
            gate_check(gate, ledger.replica(id).chain.size() == 2, "genesis plus one block");
        }
    }
}

namespace {

ScenarioConfig resilience_scenario() {
    ScenarioConfig cfg;
    cfg.seed = 9;
    cfg.topology = {"ring", 6, 5, 10};
    cfg.workload.rate_per_s = 5;
    cfg.workload.sfc_length = 4;
    cfg.workload.duration_ms = 4000;
    // Every chain ends in the dead server's domain but never starts there,
    // so a fixed orchestrator is always the crashed one while senders stay
    // reachable.
    cfg.workload.pin_final_domain = "d01";
    cfg.workload.avoid_sender_domain = "d01";
    cfg.failures = {{"es01", 0, std::nullopt}};
    return cfg;
}

}  // namespace

TEST_CASE("orchestrator failure aborts static tasks while election routes around it") {
    Gate gate{7};

    ScenarioConfig cfg = resilience_scenario();
    cfg.scheme = SchemeId::StaticConfig;  // default fixed orchestrator: es01
    RunArtifacts stat = run_scenario(cfg);
    cfg.scheme = SchemeId::Proposed;
    RunArtifacts prop = run_scenario(cfg);

    std::size_t stat_done = 0, prop_done = 0;
    for (const auto& t : stat.tasks) stat_done += t.completed;
    for (const auto& t : prop.tasks) prop_done += t.completed;
    CAPTURE(stat.tasks.size(), stat_done, prop_done);
    gate_check(gate, stat.tasks.size() >= 10, "enough tasks offered");
    gate_check(gate, prop.tasks.size() == stat.tasks.size(), "paired workloads");
    gate_check(gate, stat_done == 0, "every fixed-orchestrator task aborts");
    gate_check(gate, double(prop_done) >= 0.95 * double(prop.tasks.size()),
               "election completes at least 95 percent");

    // Same drill against the central authority: kill it instead.
    ScenarioConfig cta = resilience_scenario();
    cta.scheme = SchemeId::CentralizedTa;
    cta.failures = {{"ta", 0, std::nullopt}};
    RunArtifacts auth = run_scenario(cta);
    std::size_t cta_done = 0;
    for (const auto& t : auth.tasks) cta_done += t.completed;
    CAPTURE(auth.tasks.size(), cta_done);
    gate_check(gate, auth.tasks.size() >= 10 && cta_done == 0,
               "every authority-routed task aborts with the authority down");
}

TEST_CASE("fixture scenarios rerun byte-identically") {
    Gate gate{8};
    for (const std::string name : {"default.json", "resilience.json", "attack-tamper.json"}) {
        ScenarioConfig cfg = load_scenario(std::string(UAVSFC_SCENARIO_DIR) + "/" + name);
        RunArtifacts a = run_scenario(cfg);
        RunArtifacts b = run_scenario(cfg);

        auto csv = [&](const RunArtifacts& art) {
            SweepRun run;
            run.scheme = art.cfg.scheme;
            run.seed = art.cfg.seed;
            run.workload = art.cfg.workload;
            run.tasks = art.tasks;
            run.summary = summarize(art.tasks, art.cfg.workload);
            return render_tasks_csv({run}) + render_summary_csv({run});
        };
        CAPTURE(name);
        gate_check(gate, !a.trace_text.empty() && a.trace_text == b.trace_text,
                   "trace reruns byte-identically");
        gate_check(gate, a.ledger_text == b.ledger_text, "ledger dump reruns byte-identically");
        gate_check(gate, csv(a) == csv(b), "result tables rerun byte-identically");
    }
}

TEST_CASE("the audit trail reconstructs the handover sequence exactly") {
    Gate gate{9};
    ScenarioConfig cfg;
    cfg.seed = 77;
    cfg.topology = {"ring", 6, 5, 10};
    cfg.workload.rate_per_s = 6;
    cfg.workload.sfc_length = 4;
    cfg.workload.duration_ms = 4000;
    RunArtifacts art = run_scenario(cfg);

    std::size_t completed = 0;
    for (const auto& t : art.tasks) completed += t.completed;
    CAPTURE(completed);
    gate_check(gate, completed >= 20, "at least twenty completed tasks to audit");

    AuditDump dump = render_audit_dump(art.ledger_text);
    gate_check(gate, dump.exit_code == 0, "authentic dump verifies");

    // Audit sections, parsed back into (op, at, peer, hop) rows per task.
    struct Row {
        VirtualTime at{0};
        std::string op, actor, peer;
        int hop{0};
    };
    std::map<std::string, std::vector<Row>> sections;
    {
        std::istringstream in(dump.text);
        std::string line, current;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.rfind("task ", 0) == 0) {
                current = line.substr(5);
                continue;
            }
            Row r;
            long long at = 0;
            char op[32] = {0}, actor[64] = {0}, peer[64] = {0};
            REQUIRE(std::sscanf(line.c_str(), "  at=%lld %31s actor=%63s peer=%63s hop=%d",
                                &at, op, actor, peer, &r.hop) == 5);
            r.at = at;
            r.op = op;
            r.actor = actor;
            r.peer = peer;
            sections[current].push_back(r);
        }
    }

    const auto trace = parse_trace(art.trace_text);
    for (const auto& t : art.tasks) {
        if (!t.completed) continue;
        // The simulation's own record of each relay: who was authorized for
        // hops 1..L-1 and when.
        std::vector<Row> expect;
        for (const auto& l : trace) {
            if (l.event != "authorized") continue;
            auto hop = hop_of(l, t.task_id);
            if (hop && *hop >= 1)
                expect.push_back({l.at, "handover", "", l.actor, *hop});
        }

        const auto& rows = sections[t.task_id];
        CAPTURE(t.task_id, rows.size(), expect.size());
        gate_check(gate, rows.size() == expect.size() + 2, "start + handovers + end");
        // The end entry is stamped when the orchestrator hears about the last
        // grant, one transport leg after the verifier finished.
        bool match = rows.size() == expect.size() + 2 && rows.front().op == "start" &&
                     rows.back().op == "end" && rows.back().at >= *t.completed_at;
        for (std::size_t i = 0; match && i < expect.size(); ++i) {
            const Row& got = rows[i + 1];
            match = got.op == "handover" && got.at == expect[i].at &&
                    got.hop == expect[i].hop && got.peer == expect[i].peer;
        }
        gate_check(gate, match, "ledger rows equal the traced handover sequence");
    }

    std::string bent = art.ledger_text;
    bent[bent.size() / 2] = char(bent[bent.size() / 2] ^ 0x01);
    gate_check(gate, render_audit_dump(bent).exit_code != 0, "tampered dump rejected");
    gate_check(gate, render_audit_dump("junk").exit_code == 2, "garbage rejected");
}
