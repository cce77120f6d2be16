#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "uavsfc/rational.hpp"
#include "uavsfc/simnet.hpp"

namespace uavsfc {

class NoCandidates : public std::runtime_error {
  public:
    explicit NoCandidates(const TaskId& task)
        : std::runtime_error("no candidate edge server for task " + task) {}
};

struct ElectionParams {
    Rational alpha{1, 2};
    Rational beta{1, 2};
    std::int64_t window_ms{0};  // 0: derived from the candidate set

    void validate() const {
        if (alpha < Rational(0) || beta < Rational(0))
            throw ConfigError("election.alpha", "weights must be non-negative");
        if (!(alpha + beta == Rational(1)))
            throw ConfigError("election.alpha", "alpha + beta must equal 1");
    }
};

struct ScoreReport {
    NodeId candidate_es;
    TaskId task_id;
    Rational centrality;
    Rational coverage;
    Rational composite;
    VirtualTime broadcast_at{0};

    bool operator==(const ScoreReport&) const = default;
};

struct ElectionOutcome {
    TaskId task_id;
    NodeId winner_es;
    std::vector<ScoreReport> reports;  // sorted by candidate id
    VirtualTime decided_at{0};
};

// The edge servers of the domains the task traverses, sorted. Every
// candidate manages at least one task UAV by construction.
inline std::vector<NodeId> filter_candidates(const SfcRequest& req,
                                             const std::vector<DomainDescriptor>& domains) {
    std::map<DomainId, NodeId> es_of;
    for (const auto& d : domains) es_of[d.domain_id] = d.es_id;
    std::vector<NodeId> out;
    for (const auto& dom : traversed_domains(req)) {
        auto it = es_of.find(dom);
        if (it != es_of.end()) out.push_back(it->second);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.empty()) throw NoCandidates(req.task_id);
    return out;
}

// Inverse-distance centrality over the traversed domains, weighted by each
// domain's share of the task (its hop count) and normalized to [0,1]. A
// candidate sitting at distance zero from every traversed domain's ES (the
// single-domain case) scores exactly 1.
inline Rational centrality(const NodeId& candidate, const SfcRequest& req,
                           const EsTopology& topo,
                           const std::vector<DomainDescriptor>& domains) {
    std::map<DomainId, NodeId> es_of;
    for (const auto& d : domains) es_of[d.domain_id] = d.es_id;

    std::map<DomainId, std::int64_t> weight;
    for (const auto& hop : req.hops) ++weight[hop.domain_id];

    Rational acc;
    Rational total;
    for (const auto& dom : traversed_domains(req)) {
        auto it = es_of.find(dom);
        if (it == es_of.end()) continue;
        std::int64_t w = weight[dom];
        std::int64_t dist = topo.hop_distance(candidate, it->second);
        acc = acc + Rational(w, 1 + dist);
        total = total + Rational::from_int(w);
    }
    if (total == Rational(0)) throw NoCandidates(req.task_id);
    return acc * Rational(total.den, total.num);
}

// Fraction of the task's distinct UAVs managed by the candidate's domain.
inline Rational coverage(const NodeId& candidate, const SfcRequest& req,
                         const std::vector<DomainDescriptor>& domains) {
    const DomainDescriptor* own = nullptr;
    for (const auto& d : domains)
        if (d.es_id == candidate) own = &d;
    if (!own) throw TopologyError("candidate " + candidate + " controls no domain");

    std::set<NodeId> distinct;
    std::int64_t managed = 0;
    for (const auto& hop : req.hops)
        if (distinct.insert(hop.uav_id).second && own->uav_ids.count(hop.uav_id)) ++managed;
    if (distinct.empty()) throw NoCandidates(req.task_id);
    return Rational(managed, std::int64_t(distinct.size()));
}

inline ScoreReport score_report(const NodeId& candidate, const SfcRequest& req,
                                const EsTopology& topo,
                                const std::vector<DomainDescriptor>& domains,
                                const ElectionParams& params, VirtualTime broadcast_at) {
    params.validate();
    ScoreReport r;
    r.candidate_es = candidate;
    r.task_id = req.task_id;
    r.centrality = centrality(candidate, req, topo, domains);
    r.coverage = coverage(candidate, req, domains);
    r.composite = params.alpha * r.centrality + params.beta * r.coverage;
    r.broadcast_at = broadcast_at;
    return r;
}

// Highest composite wins; exact ties go to the lexicographically smaller id.
// Works on any report subset, so every candidate can apply it locally.
inline NodeId pick_winner(const std::vector<ScoreReport>& reports) {
    const ScoreReport* best = nullptr;
    for (const auto& r : reports)
        if (!best || best->composite < r.composite ||
            (r.composite == best->composite && r.candidate_es < best->candidate_es))
            best = &r;
    if (!best) throw std::invalid_argument("pick_winner on empty report set");
    return best->candidate_es;
}

// Smallest window that provably lets every report reach every candidate: the
// longest trigger-to-scorer fan-out leg chained with that scorer's report
// trip to its farthest peer, plus the scoring (sign) and report-check
// (verify) costs, plus one tick so a report landing exactly on the bound is
// banked before the close fires. The trigger matters: one outside the
// candidate set can stretch the fan-out leg beyond any candidate-to-candidate
// distance, and a window sized without it would close on partial report sets.
inline std::int64_t min_election_window(const NodeId& trigger_es,
                                        const std::vector<NodeId>& candidates,
                                        const EsTopology& topo, const ProcCosts& proc) {
    std::int64_t worst = 0;
    for (const auto& c : candidates) {
        const std::int64_t fan_out = topo.path_latency(trigger_es, c);
        for (const auto& p : candidates)
            worst = std::max(worst, fan_out + topo.path_latency(c, p));
    }
    return worst + proc.sign + proc.verify + 1;
}

// Centralized reference: what the distributed run must agree with, close time
// included (computed with the default processing costs).
inline ElectionOutcome run_election(const SfcRequest& req,
                                    const std::vector<DomainDescriptor>& domains,
                                    const EsTopology& topo, const ElectionParams& params,
                                    const NodeId& trigger_es, VirtualTime trigger_at) {
    params.validate();
    auto candidates = filter_candidates(req, domains);
    std::int64_t window = params.window_ms > 0
                              ? params.window_ms
                              : min_election_window(trigger_es, candidates, topo, ProcCosts{});
    ElectionOutcome out;
    out.task_id = req.task_id;
    for (const auto& c : candidates)
        out.reports.push_back(score_report(c, req, topo, domains, params, trigger_at));
    out.winner_es = pick_winner(out.reports);
    out.decided_at = trigger_at + window;
    return out;
}

// Event-driven election over the simulated backbone. The trigger ES fans the
// task out to all candidates; each scores it, signs and broadcasts a report,
// and at the common window close declares the winner it can see. The window
// is anchored at the trigger time, so all live candidates decide in the same
// instant and — given the window precondition — on identical report sets.
class DistributedElection : public std::enable_shared_from_this<DistributedElection> {
  public:
    // Called once per live candidate at window close with that candidate's
    // local view of the outcome.
    using DecideFn = std::function<void(const NodeId& candidate, const ElectionOutcome&)>;

    // `exclude` bars candidates from a rerun — e.g. a winner that went silent
    // before taking up its duties. An election with nobody left to elect
    // throws NoCandidates.
    static std::shared_ptr<DistributedElection> start(
        Simulator& sim, const EsTopology& topo, const std::vector<DomainDescriptor>& domains,
        SfcRequest req, ElectionParams params, NodeId trigger_es, DecideFn on_decide,
        std::set<NodeId> exclude = {}) {
        params.validate();
        auto self = std::shared_ptr<DistributedElection>(new DistributedElection(
            sim, topo, domains, std::move(req), params, std::move(trigger_es),
            std::move(on_decide), std::move(exclude)));
        self->kickoff();
        return self;
    }

    const std::vector<NodeId>& candidates() const { return candidates_; }
    std::int64_t window_ms() const { return window_; }

  private:
    DistributedElection(Simulator& sim, const EsTopology& topo,
                        const std::vector<DomainDescriptor>& domains, SfcRequest req,
                        ElectionParams params, NodeId trigger_es, DecideFn on_decide,
                        std::set<NodeId> exclude)
        : sim_(sim),
          topo_(topo),
          domains_(domains),
          req_(std::move(req)),
          params_(params),
          trigger_(std::move(trigger_es)),
          on_decide_(std::move(on_decide)) {
        candidates_ = filter_candidates(req_, domains_);
        if (!exclude.empty()) {
            std::erase_if(candidates_, [&](const NodeId& c) { return exclude.count(c) > 0; });
            if (candidates_.empty()) throw NoCandidates(req_.task_id);
        }
        const auto min_window =
            min_election_window(trigger_, candidates_, topo_, sim_.latency_model().proc);
        window_ = params_.window_ms > 0 ? params_.window_ms : min_window;
        if (window_ < min_window)
            throw ConfigError("election.window_ms",
                              "window " + std::to_string(window_) + "ms cannot carry every report (need " +
                                  std::to_string(min_window) + "ms)");
    }

    void kickoff() {
        trigger_at_ = sim_.now();
        auto self = shared_from_this();
        for (const auto& c : candidates_) {
            if (c == trigger_)
                sim_.schedule(0, c, [self, c] { self->on_task(c); });
            else
                sim_.send(trigger_, c, [self, c] { self->on_task(c); });
        }
    }

    void on_task(const NodeId& candidate) {
        auto self = shared_from_this();
        // Score and sign, then broadcast the report to the other candidates.
        sim_.schedule(sim_.latency_model().proc.sign, candidate, [self, candidate] {
            auto report = score_report(candidate, self->req_, self->topo_, self->domains_,
                                       self->params_, self->sim_.now());
            self->sim_.trace(candidate, "score-report",
                             self->req_.task_id + " composite=" + report.composite.str());
            self->store(candidate, report);
            for (const auto& peer : self->candidates_) {
                if (peer == candidate) continue;
                self->sim_.send(candidate, peer, [self, peer, report] {
                    // Report signature check before it counts.
                    self->sim_.schedule(self->sim_.latency_model().proc.verify, peer,
                                        [self, peer, report] { self->store(peer, report); });
                });
            }
        });
        // Every candidate decides at the same anchored instant.
        const VirtualTime decide_at = trigger_at_ + window_;
        sim_.schedule(std::max<VirtualTime>(0, decide_at - sim_.now()), candidate,
                      [self, candidate] { self->decide(candidate); });
    }

    void store(const NodeId& at, const ScoreReport& report) {
        seen_[at][report.candidate_es] = report;
    }

    void decide(const NodeId& candidate) {
        ElectionOutcome out;
        out.task_id = req_.task_id;
        out.decided_at = sim_.now();
        for (const auto& [id, report] : seen_[candidate]) out.reports.push_back(report);
        if (out.reports.empty()) return;  // nothing heard; peer will handle it
        out.winner_es = pick_winner(out.reports);
        sim_.trace(candidate, "election-decide", req_.task_id + " winner=" + out.winner_es);
        on_decide_(candidate, out);
    }

    Simulator& sim_;
    const EsTopology& topo_;
    std::vector<DomainDescriptor> domains_;
    SfcRequest req_;
    ElectionParams params_;
    NodeId trigger_;
    DecideFn on_decide_;

    std::vector<NodeId> candidates_;
    std::int64_t window_{0};
    VirtualTime trigger_at_{0};
    std::map<NodeId, std::map<NodeId, ScoreReport>> seen_;
};

}  // namespace uavsfc
