#pragma once

#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uavsfc/core.hpp"
#include "uavsfc/scenario.hpp"

// Deterministic task-plan generation. The whole plan — arrival times, hop
// placement, adversary actions — is materialized up front from two private
// RNG streams, so a run is a pure function of (scenario, seed) and two
// schemes handed the same plan process byte-identical requests.

namespace uavsfc {

// What the adversary does to one task, fixed before the run starts.
// hop_index names the targeted credential: 0 is the authorization credential
// on its way to the first UAV, k >= 1 is the handover credential for hop k.
struct AttackAction {
    std::string kind;
    int hop_index{0};
};

struct PlannedTask {
    SfcRequest req;  // issued_at = arrival time
    std::optional<AttackAction> attack;
};

struct WorkloadPlan {
    std::vector<PlannedTask> tasks;
    double offered_rate_per_s{0.0};  // resolved from whichever rate knob was set
};

namespace detail {

inline std::string task_name(std::size_t n) {
    std::ostringstream out;
    out << 't' << std::setw(5) << std::setfill('0') << n;
    return out.str();
}

}  // namespace detail

// Draw order is part of the format: per task, the workload stream yields the
// inter-arrival gap, the home domain, then per hop a domain pick (skipped for
// a pinned final hop) and a UAV pick. The adversary stream yields, per task
// under a non-"none" attack spec, one hit/miss uniform and — on a hit — one
// hop pick. Nothing else touches either stream.
inline WorkloadPlan build_workload(const ScenarioConfig& cfg, const BuiltTopology& built) {
    const auto& w = cfg.workload;
    const int k = cfg.topology.domains;
    const int upd = cfg.topology.uavs_per_domain;

    WorkloadPlan plan;
    plan.offered_rate_per_s =
        w.rate_per_s > 0 ? w.rate_per_s : w.rate_per_uav_per_s * double(k) * double(upd);
    if (plan.offered_rate_per_s <= 0) return plan;  // a quiet sky is a legal scenario

    std::map<DomainId, int> domain_index;
    for (int i = 0; i < k; ++i) domain_index[built.domains[std::size_t(i)].domain_id] = i;
    const int pin = w.pin_final_domain.empty() ? -1 : domain_index.at(w.pin_final_domain);
    const int avoid = w.avoid_sender_domain.empty() ? -1 : domain_index.at(w.avoid_sender_domain);

    // Domains within locality_radius ring steps of home, nearest-first, deduped.
    auto cluster_of = [&](int home, bool sender) {
        std::vector<int> out;
        for (int off = -w.locality_radius; off <= w.locality_radius; ++off) {
            int idx = ((home + off) % k + k) % k;
            if (sender && idx == avoid) continue;
            if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
        }
        return out;
    };

    Rng arrivals(derive_seed(cfg.seed, "workload"));
    Rng adversary(derive_seed(cfg.seed, "attack"));
    const double mean_ms = 1000.0 / plan.offered_rate_per_s;
    const VirtualTime horizon = w.warmup_ms + w.duration_ms;

    VirtualTime t = 0;
    while (true) {
        t += arrivals.exp_ms(mean_ms);
        if (t >= horizon) break;

        const int home = int(arrivals.below(std::uint64_t(k)));
        SfcRequest req;
        req.task_id = detail::task_name(plan.tasks.size() + 1);
        req.issued_at = t;
        for (int h = 0; h < w.sfc_length; ++h) {
            const bool last = h == w.sfc_length - 1;
            int dom;
            if (last && pin >= 0) {
                dom = pin;
            } else {
                auto allowed = cluster_of(home, /*sender=*/!last);
                if (allowed.empty())
                    throw ConfigError("workload.avoid_sender_domain",
                                      "no sender candidates around home " + domain_name(home));
                dom = allowed[std::size_t(arrivals.below(allowed.size()))];
            }
            int uav = int(arrivals.below(std::uint64_t(upd)));
            // A node handing a credential to itself is pointless; nudge to a
            // sibling when the domain has one.
            if (h > 0 && upd > 1 && uav_name(dom, uav) == req.hops.back().uav_id)
                uav = (uav + 1) % upd;
            req.hops.push_back({uav_name(dom, uav), domain_name(dom), "f" + std::to_string(h)});
        }
        req.requester_id = req.hops.front().uav_id;

        PlannedTask task{std::move(req), std::nullopt};
        if (cfg.attack.kind != "none" && adversary.unit() < cfg.attack.probability) {
            AttackAction act;
            act.kind = cfg.attack.kind;
            act.hop_index = int(adversary.below(std::uint64_t(w.sfc_length)));
            if (act.kind == "unregistered") {
                // Swap the targeted hop's UAV for the domain's ghost before
                // the request ever leaves the requester.
                auto& hop = task.req.hops[std::size_t(act.hop_index)];
                hop.uav_id = ghost_name(domain_index.at(hop.domain_id));
                if (act.hop_index == 0) task.req.requester_id = hop.uav_id;
            }
            task.attack = act;
        }
        plan.tasks.push_back(std::move(task));
    }
    return plan;
}

}  // namespace uavsfc
