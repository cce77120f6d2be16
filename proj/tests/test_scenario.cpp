#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "uavsfc/scenario.hpp"
#include "uavsfc/workload.hpp"
#include "uavsfc/world.hpp"

using namespace uavsfc;

namespace {

ConfigError parse_failure(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("expected ConfigError for: " << text);
    throw std::logic_error("unreachable");
}

// Undirected edge set of a built topology, normalized for comparison.
std::set<std::pair<NodeId, NodeId>> edge_set(const BuiltTopology& b) {
    std::set<std::pair<NodeId, NodeId>> out;
    for (const auto& l : b.links)
        out.insert({std::min(l.a, l.b), std::max(l.a, l.b)});
    return out;
}

}  // namespace

TEST_CASE("empty scenario document yields the default configuration") {
    ScenarioConfig c = parse_scenario("{}");
    CHECK(c.seed == 1);
    CHECK(c.replicas == 1);
    CHECK(c.scheme == SchemeId::Proposed);
    CHECK(c.topology.kind == "ring");
    CHECK(c.topology.domains == 12);
    CHECK(c.topology.uavs_per_domain == 5);
    CHECK(c.latency.inter_domain_ms == 20);
    CHECK(c.protocol.sac_ttl_ms == 60'000);
    CHECK(c.consensus.batch_size == 8);
    CHECK(c.workload.rate_per_s == 0.0);
    CHECK(c.attack.kind == "none");
    CHECK_FALSE(c.static_orchestrator.has_value());
}

TEST_CASE("every grammar field lands in its slot") {
    const std::string doc = R"({
        "seed": 77, "replicas": 3, "scheme": "static-config",
        "static_orchestrator": "es02",
        "topology": {"kind": "star", "domains": 5, "uavs_per_domain": 2, "es_link_ms": 7},
        "latency": {"intra_domain_ms": 3, "inter_domain_ms": 25, "ta_link_ms": 40,
                    "proc": {"sign": 2, "verify": 2, "seal": 2, "open": 2,
                             "ledger_read": 4, "consensus_phase": 12, "vnf_exec": 6}},
        "election": {"alpha": "0.25", "beta": "3/4", "window_ms": 120},
        "protocol": {"sac_ttl_ms": 500, "hc_freshness_ms": 90, "per_hop_es_check": true},
        "consensus": {"fault_budget": 1, "view_timeout_ms": 800, "batch_size": 16},
        "workload": {"rate_per_uav_per_s": 0.5, "sfc_length": 4, "duration_ms": 2000,
                     "warmup_ms": 250, "locality_radius": 2,
                     "pin_final_domain": "d01", "avoid_sender_domain": "d01"},
        "failures": [{"node": "es01", "crash_at_ms": 100, "recover_at_ms": 900},
                     {"node": "ta", "crash_at_ms": 0}],
        "attack": {"kind": "tamper", "probability": 0.25}
    })";
    ScenarioConfig c = parse_scenario(doc);
    CHECK(c.seed == 77);
    CHECK(c.scheme == SchemeId::StaticConfig);
    CHECK(c.static_orchestrator == NodeId("es02"));
    CHECK(c.topology.kind == "star");
    CHECK(c.topology.es_link_ms == 7);
    CHECK(c.latency.proc.consensus_phase == 12);
    // Decimal and p/q spellings meet in the same exact arithmetic.
    CHECK(c.election.alpha == Rational(1, 4));
    CHECK(c.election.beta == Rational(3, 4));
    CHECK(c.election.alpha + c.election.beta == Rational(1));
    CHECK(c.protocol.per_hop_es_check);
    CHECK(c.consensus.fault_budget == 1);
    CHECK(c.workload.rate_per_uav_per_s == 0.5);
    CHECK(c.workload.pin_final_domain == "d01");
    REQUIRE(c.failures.size() == 2);
    CHECK(c.failures[0].recover_at_ms == VirtualTime(900));
    CHECK_FALSE(c.failures[1].recover_at_ms.has_value());
    CHECK(c.attack.probability == 0.25);
}

TEST_CASE("config errors carry the offending field path") {
    CHECK(parse_failure("definitely not json").field == "$");
    CHECK(parse_failure(R"({"topolgy": {}})").field == "topolgy");
    CHECK(parse_failure(R"({"topology": {"knid": "ring"}})").field == "topology.knid");
    CHECK(parse_failure(R"({"latency": {"proc": {"sing": 1}}})").field == "latency.proc.sing");
    // The backbone weight lives under topology, not latency.
    CHECK(parse_failure(R"({"latency": {"es_link_ms": 9}})").field == "latency.es_link_ms");
    CHECK(parse_failure(R"({"seed": "one"})").field == "seed");
    CHECK(parse_failure(R"({"workload": {"sfc_length": 2.5}})").field == "workload.sfc_length");
    CHECK(parse_failure(R"({"election": {"alpha": "one half"}})").field == "election.alpha");
    CHECK(parse_failure(R"({"failures": [{"crash_at_ms": 5}]})").field == "failures[0].node");
}

TEST_CASE("semantic validation rejects inconsistent scenarios") {
    CHECK(parse_failure(R"({"election": {"alpha": "3/4", "beta": "3/4"}})").field ==
          "election.alpha");
    CHECK(parse_failure(R"({"workload": {"rate_per_s": 1, "rate_per_uav_per_s": 1}})").field ==
          "workload.rate_per_uav_per_s");
    CHECK(parse_failure(R"({"scheme": "round-robin"})").field == "scheme");
    CHECK(parse_failure(R"({"attack": {"kind": "ddos"}})").field == "attack.kind");
    CHECK(parse_failure(R"({"attack": {"probability": 1.5}})").field == "attack.probability");
    CHECK(parse_failure(R"({"topology": {"kind": "torus"}})").field == "topology.kind");
    CHECK(parse_failure(R"({"topology": {"domains": 0}})").field == "topology.domains");
    // f=2 needs 7 servers; a 4-ring can't carry it.
    CHECK(parse_failure(R"({"topology": {"domains": 4}, "consensus": {"fault_budget": 2}})")
              .field == "consensus.fault_budget");
    CHECK(parse_failure(R"({"workload": {"pin_final_domain": "d99"}})").field ==
          "workload.pin_final_domain");
    CHECK(parse_failure(R"({"failures": [{"node": "es99"}]})").field == "failures[0].node");
    CHECK(parse_failure(
              R"({"failures": [{"node": "es01", "crash_at_ms": 50, "recover_at_ms": 50}]})")
              .field == "failures[0].recover_at_ms");
    CHECK(parse_failure(R"({"static_orchestrator": "u01-01"})").field == "static_orchestrator");
}

TEST_CASE("generated backbones match their shapes") {
    TopologySpec t;
    t.es_link_ms = 10;

    SECTION("ring of five") {
        t.kind = "ring";
        t.domains = 5;
        auto b = build_topology(t);
        CHECK(edge_set(b) == std::set<std::pair<NodeId, NodeId>>{{"es01", "es02"},
                                                                 {"es02", "es03"},
                                                                 {"es03", "es04"},
                                                                 {"es04", "es05"},
                                                                 {"es01", "es05"}});
        EsTopology topo(b.es_ids, b.links);
        // Opposite side of a 5-ring is two links away.
        CHECK(topo.path_latency("es01", "es03") == 20);
        CHECK(topo.path_latency("es01", "es04") == 20);
    }
    SECTION("degenerate rings") {
        t.kind = "ring";
        t.domains = 1;
        CHECK(build_topology(t).links.empty());
        t.domains = 2;
        auto b = build_topology(t);
        CHECK(edge_set(b) == std::set<std::pair<NodeId, NodeId>>{{"es01", "es02"}});
    }
    SECTION("line of four") {
        t.kind = "line";
        t.domains = 4;
        auto b = build_topology(t);
        REQUIRE(b.links.size() == 3);
        EsTopology topo(b.es_ids, b.links);
        CHECK(topo.path_latency("es01", "es04") == 30);
    }
    SECTION("star of six routes leaf to leaf through the hub") {
        t.kind = "star";
        t.domains = 6;
        auto b = build_topology(t);
        REQUIRE(b.links.size() == 5);
        EsTopology topo(b.es_ids, b.links);
        CHECK(topo.path_latency("es02", "es06") == 20);
        CHECK(topo.hop_distance("es01", "es06") == 1);
    }
    SECTION("mesh of five is one hop everywhere") {
        t.kind = "mesh";
        t.domains = 5;
        auto b = build_topology(t);
        REQUIRE(b.links.size() == 10);
        EsTopology topo(b.es_ids, b.links);
        for (const auto& a : b.es_ids)
            for (const auto& z : b.es_ids)
                if (a != z) CHECK(topo.path_latency(a, z) == 10);
    }
}

TEST_CASE("node names sort in numeric order and stay distinct") {
    CHECK(es_name(0) == "es01");
    CHECK(es_name(11) == "es12");
    CHECK(domain_name(8) == "d09");
    CHECK(uav_name(11, 4) == "u12-05");
    CHECK(ghost_name(2) == "g03");
    std::vector<NodeId> names;
    for (int i = 0; i < 20; ++i) names.push_back(es_name(i));
    CHECK(std::is_sorted(names.begin(), names.end()));
}

TEST_CASE("normalized fills the derived defaults") {
    ScenarioConfig c = parse_scenario(R"({"topology": {"es_link_ms": 4},
                                          "latency": {"inter_domain_ms": 30}})");
    ScenarioConfig n = c.normalized();
    CHECK(n.latency.es_link_ms == 4);
    CHECK(n.protocol.hc_freshness_ms == 60);  // twice inter-domain
    CHECK(n.static_orchestrator == NodeId("es01"));
    // An explicit freshness bound survives normalization.
    ScenarioConfig e = parse_scenario(R"({"protocol": {"hc_freshness_ms": 5}})").normalized();
    CHECK(e.protocol.hc_freshness_ms == 5);
}

TEST_CASE("sub-stream seeds are stable and label-separated") {
    CHECK(derive_seed(1, "workload") == derive_seed(1, "workload"));
    CHECK(derive_seed(1, "workload") != derive_seed(1, "attack"));
    CHECK(derive_seed(1, "workload") != derive_seed(2, "workload"));
}

TEST_CASE("world wires identities, queues, and the genesis block") {
    ScenarioConfig cfg = parse_scenario(R"({"topology": {"domains": 3, "uavs_per_domain": 2}})");
    World w(cfg);

    CHECK(w.es_of("d02") == "es02");
    CHECK(w.domain_of("u03-01") == "d03");
    CHECK(w.domain_of("ta").empty());
    CHECK(w.first_es() == "es01");
    CHECK_NOTHROW(w.es_queue("es03"));

    // Real nodes are on-chain from genesis; ghosts are not.
    auto q = w.ledger.query_batch({"u01-01", "u02-02", "es03"}, "es01");
    CHECK(std::holds_alternative<AllRegistered>(q));
    auto ghost = w.ledger.query_batch({"g01"}, "es01");
    REQUIRE(std::holds_alternative<Missing>(ghost));
    CHECK(std::get<Missing>(ghost).ids == std::set<NodeId>{"g01"});

    // Same scenario, same bytes: key material must be reproducible.
    World w2(cfg);
    CHECK(w.verify_key("u02-01") == w2.verify_key("u02-01"));
    CHECK(w.seal_key("es02") == w2.seal_key("es02"));
    ScenarioConfig other = cfg;
    other.seed = 9;
    World w3(other);
    CHECK(w.verify_key("u02-01") != w3.verify_key("u02-01"));
}

TEST_CASE("workload generation is deterministic and rate-faithful") {
    ScenarioConfig cfg = parse_scenario(R"({
        "topology": {"domains": 6, "uavs_per_domain": 3},
        "workload": {"rate_per_uav_per_s": 0.5, "sfc_length": 4,
                     "duration_ms": 4000, "warmup_ms": 500}})");
    auto built = build_topology(cfg.topology);
    WorkloadPlan a = build_workload(cfg, built);
    WorkloadPlan b = build_workload(cfg, built);

    CHECK(a.offered_rate_per_s == 9.0);  // 18 UAVs at 0.5/s
    REQUIRE(a.tasks.size() == b.tasks.size());
    for (std::size_t i = 0; i < a.tasks.size(); ++i) {
        CHECK(a.tasks[i].req.task_id == b.tasks[i].req.task_id);
        CHECK(a.tasks[i].req.issued_at == b.tasks[i].req.issued_at);
        CHECK(a.tasks[i].req.hops == b.tasks[i].req.hops);
    }

    // ~9/s over 4.5s of horizon: expect around 40 arrivals, all inside it.
    CHECK(a.tasks.size() > 15);
    CHECK(a.tasks.size() < 90);
    VirtualTime prev = 0;
    for (std::size_t i = 0; i < a.tasks.size(); ++i) {
        const auto& t = a.tasks[i];
        CHECK(t.req.issued_at >= prev);
        prev = t.req.issued_at;
        CHECK(t.req.issued_at < 4500);
        CHECK(t.req.hops.size() == 4);
        CHECK(t.req.requester_id == t.req.hops.front().uav_id);
        CHECK(t.req.task_id == (i < 9 ? "t0000" + std::to_string(i + 1)
                                      : "t000" + std::to_string(i + 1)));
    }
}

TEST_CASE("hop placement honors the home-cluster radius") {
    ScenarioConfig cfg = parse_scenario(R"({
        "topology": {"domains": 12, "uavs_per_domain": 5},
        "workload": {"rate_per_s": 20, "sfc_length": 6, "duration_ms": 3000,
                     "locality_radius": 1}})");
    auto built = build_topology(cfg.topology);
    WorkloadPlan plan = build_workload(cfg, built);
    REQUIRE(plan.tasks.size() > 20);

    const int k = cfg.topology.domains;
    auto dom_index = [&](const DomainId& d) {
        for (int i = 0; i < k; ++i)
            if (domain_name(i) == d) return i;
        FAIL("unknown domain " << d);
        return -1;
    };
    auto ring_dist = [&](int a, int b) {
        int d = std::abs(a - b);
        return std::min(d, k - d);
    };
    for (const auto& t : plan.tasks) {
        // Some home domain must cover every hop within the radius. That is
        // exactly the generator's contract, checked from the outside.
        bool covered = false;
        for (int h = 0; h < k && !covered; ++h) {
            covered = std::all_of(t.req.hops.begin(), t.req.hops.end(), [&](const SfcHop& hop) {
                return ring_dist(dom_index(hop.domain_id), h) <= 1;
            });
        }
        CHECK(covered);
        // Radius 1 on a 12-ring also bounds the pairwise spread by 2.
        for (const auto& x : t.req.hops)
            for (const auto& y : t.req.hops)
                CHECK(ring_dist(dom_index(x.domain_id), dom_index(y.domain_id)) <= 2);
    }
}

TEST_CASE("pinned and avoided domains shape the failure-drill workload") {
    ScenarioConfig cfg = parse_scenario(R"({
        "topology": {"domains": 8, "uavs_per_domain": 3},
        "workload": {"rate_per_s": 15, "sfc_length": 3, "duration_ms": 3000,
                     "locality_radius": 2,
                     "pin_final_domain": "d01", "avoid_sender_domain": "d01"}})");
    auto built = build_topology(cfg.topology);
    WorkloadPlan plan = build_workload(cfg, built);
    REQUIRE(plan.tasks.size() > 10);
    for (const auto& t : plan.tasks) {
        CHECK(t.req.hops.back().domain_id == "d01");
        for (std::size_t h = 0; h + 1 < t.req.hops.size(); ++h)
            CHECK(t.req.hops[h].domain_id != "d01");
    }
}

TEST_CASE("attack plans fire per the configured odds") {
    ScenarioConfig base = parse_scenario(R"({
        "topology": {"domains": 4, "uavs_per_domain": 2},
        "workload": {"rate_per_s": 25, "sfc_length": 4, "duration_ms": 4000}})");
    auto built = build_topology(base.topology);

    SECTION("kind none never schedules interference") {
        WorkloadPlan plan = build_workload(base, built);
        for (const auto& t : plan.tasks) CHECK_FALSE(t.attack.has_value());
    }
    SECTION("probability one hits every task") {
        ScenarioConfig cfg = base;
        cfg.attack = {"tamper", 1.0};
        WorkloadPlan plan = build_workload(cfg, built);
        REQUIRE(plan.tasks.size() > 30);
        for (const auto& t : plan.tasks) {
            REQUIRE(t.attack.has_value());
            CHECK(t.attack->kind == "tamper");
            CHECK(t.attack->hop_index >= 0);
            CHECK(t.attack->hop_index < 4);
        }
    }
    SECTION("unregistered swaps in the ghost exactly at the struck hop") {
        ScenarioConfig cfg = base;
        cfg.attack = {"unregistered", 1.0};
        WorkloadPlan plan = build_workload(cfg, built);
        for (const auto& t : plan.tasks) {
            REQUIRE(t.attack.has_value());
            for (int h = 0; h < int(t.req.hops.size()); ++h) {
                const auto& uav = t.req.hops[std::size_t(h)].uav_id;
                if (h == t.attack->hop_index) {
                    CHECK(uav.front() == 'g');
                    // The ghost belongs to the domain it was swapped into.
                    CHECK(uav.substr(1) == t.req.hops[std::size_t(h)].domain_id.substr(1));
                } else {
                    CHECK(uav.front() == 'u');
                }
            }
        }
    }
    SECTION("fractional probability lands near its expectation") {
        ScenarioConfig cfg = base;
        cfg.attack = {"replay", 0.5};
        cfg.workload.rate_per_s = 50;
        WorkloadPlan plan = build_workload(cfg, built);
        REQUIRE(plan.tasks.size() > 100);
        std::size_t hit = 0;
        for (const auto& t : plan.tasks) hit += t.attack.has_value();
        double frac = double(hit) / double(plan.tasks.size());
        CHECK(frac > 0.3);
        CHECK(frac < 0.7);
    }
}

TEST_CASE("a zero-rate scenario produces an empty plan") {
    ScenarioConfig cfg = parse_scenario(R"({"topology": {"domains": 2}})");
    auto built = build_topology(cfg.topology);
    CHECK(build_workload(cfg, built).tasks.empty());
    CHECK(build_workload(cfg, built).offered_rate_per_s == 0.0);
}
