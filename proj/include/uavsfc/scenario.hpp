#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavsfc/core.hpp"
#include "uavsfc/crypto.hpp"
#include "uavsfc/election.hpp"
#include "uavsfc/simnet.hpp"

// Scenario grammar: one JSON document plus a seed fully determines a run.
// Parsing is strict — unknown keys and type mismatches are ConfigErrors that
// name the offending field path — so a typo'd knob fails loudly instead of
// silently running with a default.

namespace uavsfc {

enum class SchemeId { Proposed, CentralizedTa, StaticConfig };

inline const char* scheme_name(SchemeId s) {
    switch (s) {
        case SchemeId::Proposed: return "proposed";
        case SchemeId::CentralizedTa: return "centralized-ta";
        case SchemeId::StaticConfig: return "static-config";
    }
    return "?";
}

inline std::optional<SchemeId> scheme_from(std::string_view s) {
    if (s == "proposed") return SchemeId::Proposed;
    if (s == "centralized-ta") return SchemeId::CentralizedTa;
    if (s == "static-config") return SchemeId::StaticConfig;
    return std::nullopt;
}

// Synthetic backbone shapes. `es_link_ms` is the weight of every generated
// ES-ES link; it lives here (not in the latency model) so there is a single
// source of truth for backbone distances.
struct TopologySpec {
    std::string kind{"ring"};
    int domains{12};
    int uavs_per_domain{5};
    std::int64_t es_link_ms{10};
};

struct ProtocolSpec {
    VirtualTime sac_ttl_ms{60'000};
    VirtualTime hc_freshness_ms{0};  // 0: twice the inter-domain latency
    bool per_hop_es_check{false};    // extra ledger re-check before each grant
};

struct ConsensusSpec {
    int fault_budget{-1};             // -1: largest f with 3f+1 <= replica count
    std::int64_t view_timeout_ms{0};  // 0: derived from backbone diameter
    int batch_size{8};
};

// Open-loop Poisson arrivals. Exactly one of the two rates may be positive;
// both zero is a legal no-traffic scenario. Hop domains are drawn from the
// cluster of domains within `locality_radius` ring steps of the task's home
// domain, which keeps election candidate sets (and windows) small and
// length-independent. The two pin/avoid knobs exist for failure drills:
// pin the last hop into a crashed orchestrator's domain while keeping every
// *sending* hop out of it.
struct WorkloadSpec {
    double rate_per_s{0.0};
    double rate_per_uav_per_s{0.0};
    int sfc_length{5};
    VirtualTime duration_ms{10'000};
    VirtualTime warmup_ms{0};
    int locality_radius{1};
    std::string pin_final_domain;    // "" = unconstrained
    std::string avoid_sender_domain; // "" = unconstrained
};

struct FailureSpec {
    NodeId node;
    VirtualTime crash_at_ms{0};
    std::optional<VirtualTime> recover_at_ms;
};

// In-flight adversary applied per task with the given probability.
//   tamper       — flip a ciphertext byte of a credential in transit
//   replay       — hold a credential back until past its freshness bound
//   impersonate  — strip and re-sign a credential under a foreign key
//   unregistered — substitute a UAV that was never registered on-chain
struct AttackSpec {
    std::string kind{"none"};
    double probability{1.0};
};

struct ScenarioConfig {
    std::uint64_t seed{1};
    int replicas{1};
    SchemeId scheme{SchemeId::Proposed};
    std::optional<NodeId> static_orchestrator;  // default: lexicographically first ES
    TopologySpec topology;
    LatencyModel latency;
    ElectionParams election;
    ProtocolSpec protocol;
    ConsensusSpec consensus;
    WorkloadSpec workload;
    std::vector<FailureSpec> failures;
    AttackSpec attack;

    void validate() const;
    ScenarioConfig normalized() const;
};

// ---------------------------------------------------------------------------
// Node naming. Indexes are zero-based, names are one-based and zero-padded
// so lexicographic order equals numeric order ("es01" < "es02" < ... "es12").

namespace detail {

inline std::string pad2(int n) {
    std::string s = std::to_string(n);
    return s.size() < 2 ? "0" + s : s;
}

}  // namespace detail

inline NodeId es_name(int domain_index) { return "es" + detail::pad2(domain_index + 1); }
inline DomainId domain_name(int domain_index) { return "d" + detail::pad2(domain_index + 1); }
inline NodeId uav_name(int domain_index, int uav_index) {
    return "u" + detail::pad2(domain_index + 1) + "-" + detail::pad2(uav_index + 1);
}
// Ghosts hold valid keys and exist on the network, but are never registered
// on-chain: the raw material for "unregistered node" drills.
inline NodeId ghost_name(int domain_index) { return "g" + detail::pad2(domain_index + 1); }

inline constexpr const char* kTrustedAuthorityId = "ta";

struct BuiltTopology {
    std::vector<NodeId> es_ids;  // index = domain index
    std::vector<EsTopology::Link> links;
    std::vector<DomainDescriptor> domains;
    std::vector<NodeId> ghost_ids;
};

inline BuiltTopology build_topology(const TopologySpec& t) {
    if (t.domains < 1 || t.domains > 99)
        throw ConfigError("topology.domains", "must be in [1, 99]");
    if (t.uavs_per_domain < 1 || t.uavs_per_domain > 99)
        throw ConfigError("topology.uavs_per_domain", "must be in [1, 99]");
    if (t.es_link_ms < 1) throw ConfigError("topology.es_link_ms", "must be positive");

    BuiltTopology out;
    const int k = t.domains;
    for (int i = 0; i < k; ++i) {
        out.es_ids.push_back(es_name(i));
        out.ghost_ids.push_back(ghost_name(i));
        DomainDescriptor d;
        d.domain_id = domain_name(i);
        d.es_id = out.es_ids.back();
        for (int u = 0; u < t.uavs_per_domain; ++u) d.uav_ids.insert(uav_name(i, u));
        out.domains.push_back(std::move(d));
    }

    auto link = [&](int i, int j) {
        out.links.push_back({out.es_ids[std::size_t(i)], out.es_ids[std::size_t(j)], t.es_link_ms});
    };
    if (t.kind == "ring") {
        // Degenerate sizes: one node has no links, two nodes share one edge.
        if (k == 2) link(0, 1);
        else if (k > 2)
            for (int i = 0; i < k; ++i) link(i, (i + 1) % k);
    } else if (t.kind == "line") {
        for (int i = 0; i + 1 < k; ++i) link(i, i + 1);
    } else if (t.kind == "star") {
        for (int i = 1; i < k; ++i) link(0, i);
    } else if (t.kind == "mesh") {
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j) link(i, j);
    } else {
        throw ConfigError("topology.kind", "unknown kind \"" + t.kind +
                                               "\" (ring, line, star, mesh)");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation

inline void ScenarioConfig::validate() const {
    // build_topology re-checks the numeric ranges and the kind.
    auto built = build_topology(topology);

    if (replicas < 1) throw ConfigError("replicas", "must be at least 1");

    auto nonneg = [](std::int64_t v, const char* path) {
        if (v < 0) throw ConfigError(path, "must be non-negative");
    };
    nonneg(latency.intra_domain_ms, "latency.intra_domain_ms");
    nonneg(latency.inter_domain_ms, "latency.inter_domain_ms");
    nonneg(latency.ta_link_ms, "latency.ta_link_ms");
    nonneg(latency.proc.sign, "latency.proc.sign");
    nonneg(latency.proc.verify, "latency.proc.verify");
    nonneg(latency.proc.seal, "latency.proc.seal");
    nonneg(latency.proc.open, "latency.proc.open");
    nonneg(latency.proc.ledger_read, "latency.proc.ledger_read");
    nonneg(latency.proc.consensus_phase, "latency.proc.consensus_phase");
    nonneg(latency.proc.vnf_exec, "latency.proc.vnf_exec");

    election.validate();
    if (election.window_ms < 0) throw ConfigError("election.window_ms", "must be non-negative");

    if (protocol.sac_ttl_ms < 1) throw ConfigError("protocol.sac_ttl_ms", "must be positive");
    if (protocol.hc_freshness_ms < 0)
        throw ConfigError("protocol.hc_freshness_ms", "must be non-negative");

    if (consensus.batch_size < 1) throw ConfigError("consensus.batch_size", "must be at least 1");
    if (consensus.fault_budget < -1)
        throw ConfigError("consensus.fault_budget", "must be -1 (auto) or non-negative");
    if (consensus.fault_budget > 0 && 3 * consensus.fault_budget + 1 > topology.domains)
        throw ConfigError("consensus.fault_budget",
                          "needs 3f+1 <= " + std::to_string(topology.domains) + " edge servers");
    if (consensus.view_timeout_ms < 0)
        throw ConfigError("consensus.view_timeout_ms", "must be non-negative");

    if (workload.rate_per_s < 0) throw ConfigError("workload.rate_per_s", "must be non-negative");
    if (workload.rate_per_uav_per_s < 0)
        throw ConfigError("workload.rate_per_uav_per_s", "must be non-negative");
    if (workload.rate_per_s > 0 && workload.rate_per_uav_per_s > 0)
        throw ConfigError("workload.rate_per_uav_per_s",
                          "set either rate_per_s or rate_per_uav_per_s, not both");
    if (workload.sfc_length < 1) throw ConfigError("workload.sfc_length", "must be at least 1");
    if (workload.duration_ms < 1) throw ConfigError("workload.duration_ms", "must be positive");
    if (workload.warmup_ms < 0) throw ConfigError("workload.warmup_ms", "must be non-negative");
    if (workload.locality_radius < 0)
        throw ConfigError("workload.locality_radius", "must be non-negative");

    auto known_domain = [&](const std::string& d) {
        return std::any_of(built.domains.begin(), built.domains.end(),
                           [&](const DomainDescriptor& dd) { return dd.domain_id == d; });
    };
    if (!workload.pin_final_domain.empty() && !known_domain(workload.pin_final_domain))
        throw ConfigError("workload.pin_final_domain",
                          "unknown domain \"" + workload.pin_final_domain + "\"");
    if (!workload.avoid_sender_domain.empty()) {
        if (!known_domain(workload.avoid_sender_domain))
            throw ConfigError("workload.avoid_sender_domain",
                              "unknown domain \"" + workload.avoid_sender_domain + "\"");
        if (topology.domains < 2)
            throw ConfigError("workload.avoid_sender_domain",
                              "needs at least two domains to have an alternative");
    }

    static const std::set<std::string> kAttackKinds{"none", "tamper", "replay", "impersonate",
                                                    "unregistered"};
    if (!kAttackKinds.count(attack.kind))
        throw ConfigError("attack.kind", "unknown kind \"" + attack.kind + "\"");
    if (attack.probability < 0.0 || attack.probability > 1.0)
        throw ConfigError("attack.probability", "must be in [0, 1]");

    std::set<NodeId> known_nodes{kTrustedAuthorityId};
    known_nodes.insert(built.es_ids.begin(), built.es_ids.end());
    known_nodes.insert(built.ghost_ids.begin(), built.ghost_ids.end());
    for (const auto& d : built.domains) known_nodes.insert(d.uav_ids.begin(), d.uav_ids.end());
    for (std::size_t i = 0; i < failures.size(); ++i) {
        const auto path = "failures[" + std::to_string(i) + "]";
        const auto& f = failures[i];
        if (!known_nodes.count(f.node))
            throw ConfigError(path + ".node", "unknown node \"" + f.node + "\"");
        if (f.crash_at_ms < 0) throw ConfigError(path + ".crash_at_ms", "must be non-negative");
        if (f.recover_at_ms && *f.recover_at_ms <= f.crash_at_ms)
            throw ConfigError(path + ".recover_at_ms", "must be after crash_at_ms");
    }

    if (static_orchestrator &&
        std::find(built.es_ids.begin(), built.es_ids.end(), *static_orchestrator) ==
            built.es_ids.end())
        throw ConfigError("static_orchestrator",
                          "unknown edge server \"" + *static_orchestrator + "\"");
}

// Resolves the derived defaults so downstream code never re-implements them:
// the latency model's scalar ES-link figure mirrors the topology link weight,
// and a zero handover freshness bound becomes twice the inter-domain latency.
inline ScenarioConfig ScenarioConfig::normalized() const {
    ScenarioConfig c = *this;
    c.latency.es_link_ms = c.topology.es_link_ms;
    if (c.protocol.hc_freshness_ms == 0)
        c.protocol.hc_freshness_ms = 2 * c.latency.inter_domain_ms;
    if (!c.static_orchestrator) c.static_orchestrator = es_name(0);
    return c;
}

// ---------------------------------------------------------------------------
// JSON parsing

namespace detail {

using Json = nlohmann::json;

inline void require_object(const Json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
}

inline void reject_unknown_keys(const Json& j, const std::string& path,
                                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = std::any_of(allowed.begin(), allowed.end(),
                              [&](const char* k) { return it.key() == k; });
        if (!ok) throw ConfigError(path.empty() ? it.key() : path + "." + it.key(),
                                   "unknown key");
    }
}

inline std::int64_t as_int(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
    return j.get<std::int64_t>();
}

inline double as_double(const Json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

inline bool as_bool(const Json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
    return j.get<bool>();
}

inline std::string as_string(const Json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

// "p/q" or a decimal literal like "0.5".
inline Rational as_rational(const Json& j, const std::string& path) {
    const std::string s = as_string(j, path);
    try {
        auto slash = s.find('/');
        if (slash == std::string::npos) return Rational::from_decimal(s);
        return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError(path, "expected \"p/q\" or a decimal, got \"" + s + "\"");
    }
}

// Applies `fn(value, path)` when the key is present; silence means default.
template <typename Fn>
void maybe(const Json& j, const std::string& path, const char* key, Fn fn) {
    auto it = j.find(key);
    if (it != j.end()) fn(*it, path.empty() ? key : path + "." + key);
}

inline void parse_proc(const Json& j, const std::string& path, ProcCosts& p) {
    require_object(j, path);
    reject_unknown_keys(j, path, {"sign", "verify", "seal", "open", "ledger_read",
                                  "consensus_phase", "vnf_exec"});
    maybe(j, path, "sign", [&](const Json& v, const std::string& pp) { p.sign = as_int(v, pp); });
    maybe(j, path, "verify",
          [&](const Json& v, const std::string& pp) { p.verify = as_int(v, pp); });
    maybe(j, path, "seal", [&](const Json& v, const std::string& pp) { p.seal = as_int(v, pp); });
    maybe(j, path, "open", [&](const Json& v, const std::string& pp) { p.open = as_int(v, pp); });
    maybe(j, path, "ledger_read",
          [&](const Json& v, const std::string& pp) { p.ledger_read = as_int(v, pp); });
    maybe(j, path, "consensus_phase",
          [&](const Json& v, const std::string& pp) { p.consensus_phase = as_int(v, pp); });
    maybe(j, path, "vnf_exec",
          [&](const Json& v, const std::string& pp) { p.vnf_exec = as_int(v, pp); });
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const std::string& text) {
    using detail::Json;
    using detail::as_bool;
    using detail::as_double;
    using detail::as_int;
    using detail::as_rational;
    using detail::as_string;
    using detail::maybe;
    using detail::reject_unknown_keys;
    using detail::require_object;

    Json root;
    try {
        root = Json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError("$", std::string("not valid JSON: ") + e.what());
    }
    require_object(root, "$");
    reject_unknown_keys(root, "",
                        {"seed", "replicas", "scheme", "static_orchestrator", "topology",
                         "latency", "election", "protocol", "consensus", "workload", "failures",
                         "attack"});

    ScenarioConfig c;

    maybe(root, "", "seed", [&](const Json& v, const std::string& p) {
        std::int64_t s = as_int(v, p);
        if (s < 0) throw ConfigError(p, "must be non-negative");
        c.seed = std::uint64_t(s);
    });
    maybe(root, "", "replicas",
          [&](const Json& v, const std::string& p) { c.replicas = int(as_int(v, p)); });
    maybe(root, "", "scheme", [&](const Json& v, const std::string& p) {
        auto s = scheme_from(as_string(v, p));
        if (!s)
            throw ConfigError(p, "unknown scheme (proposed, centralized-ta, static-config)");
        c.scheme = *s;
    });
    maybe(root, "", "static_orchestrator",
          [&](const Json& v, const std::string& p) { c.static_orchestrator = as_string(v, p); });

    maybe(root, "", "topology", [&](const Json& j, const std::string& path) {
        require_object(j, path);
        reject_unknown_keys(j, path, {"kind", "domains", "uavs_per_domain", "es_link_ms"});
        maybe(j, path, "kind",
              [&](const Json& v, const std::string& p) { c.topology.kind = as_string(v, p); });
        maybe(j, path, "domains",
              [&](const Json& v, const std::string& p) { c.topology.domains = int(as_int(v, p)); });
        maybe(j, path, "uavs_per_domain", [&](const Json& v, const std::string& p) {
            c.topology.uavs_per_domain = int(as_int(v, p));
        });
        maybe(j, path, "es_link_ms",
              [&](const Json& v, const std::string& p) { c.topology.es_link_ms = as_int(v, p); });
    });

    maybe(root, "", "latency", [&](const Json& j, const std::string& path) {
        require_object(j, path);
        // Backbone link weight lives under topology; rejecting it here keeps
        // one source of truth.
        reject_unknown_keys(j, path, {"intra_domain_ms", "inter_domain_ms", "ta_link_ms", "proc"});
        maybe(j, path, "intra_domain_ms", [&](const Json& v, const std::string& p) {
            c.latency.intra_domain_ms = as_int(v, p);
        });
        maybe(j, path, "inter_domain_ms", [&](const Json& v, const std::string& p) {
            c.latency.inter_domain_ms = as_int(v, p);
        });
        maybe(j, path, "ta_link_ms",
              [&](const Json& v, const std::string& p) { c.latency.ta_link_ms = as_int(v, p); });
        maybe(j, path, "proc", [&](const Json& v, const std::string& p) {
            detail::parse_proc(v, p, c.latency.proc);
        });
    });

    maybe(root, "", "election", [&](const Json& j, const std::string& path) {
        require_object(j, path);
        reject_unknown_keys(j, path, {"alpha", "beta", "window_ms"});
        maybe(j, path, "alpha",
              [&](const Json& v, const std::string& p) { c.election.alpha = as_rational(v, p); });
        maybe(j, path, "beta",
              [&](const Json& v, const std::string& p) { c.election.beta = as_rational(v, p); });
        maybe(j, path, "window_ms",
              [&](const Json& v, const std::string& p) { c.election.window_ms = as_int(v, p); });
    });

    maybe(root, "", "protocol", [&](const Json& j, const std::string& path) {
        require_object(j, path);
        reject_unknown_keys(j, path, {"sac_ttl_ms", "hc_freshness_ms", "per_hop_es_check"});
        maybe(j, path, "sac_ttl_ms",
              [&](const Json& v, const std::string& p) { c.protocol.sac_ttl_ms = as_int(v, p); });
        maybe(j, path, "hc_freshness_ms", [&](const Json& v, const std::string& p) {
            c.protocol.hc_freshness_ms = as_int(v, p);
        });
        maybe(j, path, "per_hop_es_check", [&](const Json& v, const std::string& p) {
            c.protocol.per_hop_es_check = as_bool(v, p);
        });
    });

    maybe(root, "", "consensus", [&](const Json& j, const std::string& path) {
        require_object(j, path);
        reject_unknown_keys(j, path, {"fault_budget", "view_timeout_ms", "batch_size"});
        maybe(j, path, "fault_budget", [&](const Json& v, const std::string& p) {
            c.consensus.fault_budget = int(as_int(v, p));
        });
        maybe(j, path, "view_timeout_ms", [&](const Json& v, const std::string& p) {
            c.consensus.view_timeout_ms = as_int(v, p);
        });
        maybe(j, path, "batch_size", [&](const Json& v, const std::string& p) {
            c.consensus.batch_size = int(as_int(v, p));
        });
    });

    maybe(root, "", "workload", [&](const Json& j, const std::string& path) {
        require_object(j, path);
        reject_unknown_keys(j, path,
                            {"rate_per_s", "rate_per_uav_per_s", "sfc_length", "duration_ms",
                             "warmup_ms", "locality_radius", "pin_final_domain",
                             "avoid_sender_domain"});
        maybe(j, path, "rate_per_s", [&](const Json& v, const std::string& p) {
            c.workload.rate_per_s = as_double(v, p);
        });
        maybe(j, path, "rate_per_uav_per_s", [&](const Json& v, const std::string& p) {
            c.workload.rate_per_uav_per_s = as_double(v, p);
        });
        maybe(j, path, "sfc_length", [&](const Json& v, const std::string& p) {
            c.workload.sfc_length = int(as_int(v, p));
        });
        maybe(j, path, "duration_ms", [&](const Json& v, const std::string& p) {
            c.workload.duration_ms = as_int(v, p);
        });
        maybe(j, path, "warmup_ms",
              [&](const Json& v, const std::string& p) { c.workload.warmup_ms = as_int(v, p); });
        maybe(j, path, "locality_radius", [&](const Json& v, const std::string& p) {
            c.workload.locality_radius = int(as_int(v, p));
        });
        maybe(j, path, "pin_final_domain", [&](const Json& v, const std::string& p) {
            c.workload.pin_final_domain = as_string(v, p);
        });
        maybe(j, path, "avoid_sender_domain", [&](const Json& v, const std::string& p) {
            c.workload.avoid_sender_domain = as_string(v, p);
        });
    });

    maybe(root, "", "failures", [&](const Json& j, const std::string& path) {
        if (!j.is_array()) throw ConfigError(path, "expected an array");
        for (std::size_t i = 0; i < j.size(); ++i) {
            const auto p = path + "[" + std::to_string(i) + "]";
            require_object(j[i], p);
            reject_unknown_keys(j[i], p, {"node", "crash_at_ms", "recover_at_ms"});
            FailureSpec f;
            auto node = j[i].find("node");
            if (node == j[i].end()) throw ConfigError(p + ".node", "required");
            f.node = as_string(*node, p + ".node");
            maybe(j[i], p, "crash_at_ms",
                  [&](const Json& v, const std::string& pp) { f.crash_at_ms = as_int(v, pp); });
            maybe(j[i], p, "recover_at_ms",
                  [&](const Json& v, const std::string& pp) { f.recover_at_ms = as_int(v, pp); });
            c.failures.push_back(std::move(f));
        }
    });

    maybe(root, "", "attack", [&](const Json& j, const std::string& path) {
        require_object(j, path);
        reject_unknown_keys(j, path, {"kind", "probability"});
        maybe(j, path, "kind",
              [&](const Json& v, const std::string& p) { c.attack.kind = as_string(v, p); });
        maybe(j, path, "probability", [&](const Json& v, const std::string& p) {
            c.attack.probability = as_double(v, p);
        });
    });

    c.validate();
    return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot read \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

// Stable sub-stream seeds so adding a consumer never perturbs the others.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    Digest32 d = digest("uavsfc.seed.v1\t" + std::to_string(master) + "\t" + std::string(label));
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x = (x << 8) | d[std::size_t(i)];
    return x;
}

}  // namespace uavsfc
