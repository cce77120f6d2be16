#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "uavsfc/auth.hpp"
#include "uavsfc/election.hpp"
#include "uavsfc/workload.hpp"
#include "uavsfc/world.hpp"

// The three orchestration schemes under comparison, driven over the same
// simulated network and the same task plan:
//
//   proposed        per-task orchestrator election, then the four-phase
//                   credential protocol (pre-verify + mission token, relay
//                   tokens per hop, on-chain audit trail)
//   static-config   the same credential protocol, but every task is funneled
//                   through one fixed orchestrator and no election is run
//   centralized-ta  no tokens at all: every hop is a round trip to the
//                   trusted authority, which re-verifies the requester
//                   against its registry before granting the hop
//
// Completion is the moment the final hop's node passes verification; the
// audit write-back that follows is bookkeeping and does not move the metric.

namespace uavsfc {

struct TaskResult {
    TaskId task_id;
    VirtualTime initiated_at{0};
    std::optional<VirtualTime> decided_at;    // election close; empty for the baselines
    std::optional<VirtualTime> sac_issued_at; // empty for centralized-ta
    std::vector<VirtualTime> hop_verified;    // grant time per hop, in path order
    std::optional<VirtualTime> completed_at;  // last entry of hop_verified
    std::optional<VirtualTime> audited_at;    // audit trail fully resolved on-chain
    bool completed{false};
    std::string abort_reason;           // empty iff completed
    int abort_hop{-1};                  // hop whose credential failed; -1 pre-path
    int hops{0};                        // requested chain length
    NodeId orchestrator;                // elected or static; empty for centralized-ta
    int reelections{0};

    std::optional<VirtualTime> latency_ms() const {
        if (!completed || !completed_at) return std::nullopt;
        return *completed_at - initiated_at;
    }
};

// Drives one scheme over one plan. The runner must outlive Simulator::run(),
// which run_plan() below guarantees; event callbacks capture `this`.
class SchemeRunner {
  public:
    SchemeRunner(World& w, const WorkloadPlan& plan) : w_(w) {
        for (std::size_t i = 0; i < w_.built.domains.size(); ++i)
            ghost_of_[w_.built.domains[i].domain_id] = w_.built.ghost_ids[i];
        for (const auto& t : plan.tasks) {
            auto ctx = std::make_shared<TaskCtx>();
            ctx->plan = t;
            ctx->res.task_id = t.req.task_id;
            ctx->res.initiated_at = t.req.issued_at;
            ctx->res.hops = int(t.req.hops.size());
            tasks_.push_back(std::move(ctx));
        }
    }

    void launch() {
        for (auto& ctx : tasks_) {
            const auto& req = ctx->plan.req;
            VirtualTime delay = req.issued_at - w_.sim.now();
            w_.sim.schedule(delay, req.requester_id, [this, ctx] { initiate(ctx); });
        }
    }

    // After the simulator drains: whatever never reached a verdict was lost
    // to a crash (dropped delivery or work lost mid-queue). Mark it aborted
    // where it stood.
    void finalize() {
        for (auto& ctx : tasks_) {
            if (ctx->done) continue;
            ctx->res.completed = false;
            ctx->res.abort_reason = "stalled:" + ctx->stage;
            ctx->done = true;
        }
    }

    std::vector<TaskResult> results() const {
        std::vector<TaskResult> out;
        out.reserve(tasks_.size());
        for (const auto& ctx : tasks_) out.push_back(ctx->res);
        return out;
    }

  private:
    struct TaskCtx {
        PlannedTask plan;
        TaskResult res;
        std::string stage{"init"};
        std::map<NodeId, Bytes> hop_seal_keys;  // registry snapshot from issuance
        ExecutionAuthorization auth;            // most recent hop grant
        std::set<NodeId> excluded;              // winners barred after going silent
        std::vector<AuditSubmission> audit;
        bool done{false};
    };
    using Ctx = std::shared_ptr<TaskCtx>;

    const ScenarioConfig& cfg() const { return w_.cfg; }
    const ProcCosts& proc() const { return w_.cfg.latency.proc; }
    Simulator& sim() { return w_.sim; }

    // ---- shared entry ----

    void initiate(const Ctx& ctx) {
        const auto& req = ctx->plan.req;
        sim().trace(req.requester_id, "task-init",
                    req.task_id + " scheme=" + scheme_name(cfg().scheme) +
                        " hops=" + std::to_string(req.hops.size()));
        if (cfg().scheme == SchemeId::CentralizedTa) {
            ta_round(ctx, 0);
            return;
        }
        // The requester hands the request to its own domain's edge server,
        // which anchors election (or forwards to the static orchestrator).
        const NodeId home = w_.es_of(req.hops.front().domain_id);
        ctx->stage = "request-to-es";
        sim().send(req.requester_id, home, [this, ctx, home] {
            if (cfg().scheme == SchemeId::Proposed) start_election(ctx, home);
            else forward_static(ctx, home);
        });
    }

    // ---- proposed: per-task election with one silent-winner retry ----

    void start_election(const Ctx& ctx, const NodeId& home) {
        ctx->stage = "election";
        try {
            DistributedElection::start(
                sim(), w_.topo, w_.built.domains, ctx->plan.req, cfg().election, home,
                [this, ctx, home](const NodeId& candidate, const ElectionOutcome& out) {
                    on_decide(ctx, home, candidate, out);
                },
                ctx->excluded);
        } catch (const NoCandidates&) {
            abort_task(ctx, -1, "no-candidates", home, home);
        }
    }

    void on_decide(const Ctx& ctx, const NodeId& home, const NodeId& candidate,
                   const ElectionOutcome& out) {
        if (ctx->done) return;
        if (candidate == out.winner_es) {
            ctx->res.decided_at = out.decided_at;
            ctx->res.orchestrator = out.winner_es;
            issue_sac(ctx, out.winner_es);
            return;
        }
        // The home server doubles as the liveness watchdog: a winner that is
        // already silent at the decision instant never takes up its duties,
        // so the home server re-runs the election without it. One retry —
        // a second silent winner aborts the task.
        if (candidate != home) return;
        if (sim().is_live(out.winner_es, sim().now())) return;
        ctx->excluded.insert(out.winner_es);
        ++ctx->res.reelections;
        if (ctx->res.reelections > 1) {
            abort_task(ctx, -1, "re-election-exhausted", home, home);
            return;
        }
        sim().trace(home, "re-election",
                    ctx->plan.req.task_id + " excluding " + out.winner_es);
        start_election(ctx, home);
    }

    // ---- static-config: no election, one well-known orchestrator ----

    void forward_static(const Ctx& ctx, const NodeId& home) {
        const NodeId orch = *cfg().static_orchestrator;
        ctx->res.orchestrator = orch;
        // Zero-cost health probe standing in for a forward timeout: a dead
        // orchestrator aborts the task at the home server instead of leaving
        // it in limbo.
        if (!sim().is_live(orch, sim().now())) {
            abort_task(ctx, -1, "orchestrator-offline", home, home);
            return;
        }
        ctx->stage = "forward-to-orchestrator";
        sim().send(home, orch, [this, ctx, orch] { issue_sac(ctx, orch); });
    }

    // ---- four-phase pipeline (proposed and static-config) ----

    void issue_sac(const Ctx& ctx, const NodeId& orch) {
        ctx->stage = "pre-verify";
        w_.es_queue(orch).enqueue(sim(), proc().ledger_read + proc().sign, [this, ctx, orch] {
            if (ctx->done) return;
            IssueResult r = pre_verify_and_issue(orch, w_.signing_secret(orch), ctx->plan.req,
                                                 w_.ledger, sim().now(),
                                                 cfg().protocol.sac_ttl_ms);
            if (std::holds_alternative<ReplicaUnavailable>(r)) {
                abort_task(ctx, -1, "ledger-unavailable", orch, orch);
                return;
            }
            if (auto* rej = std::get_if<IssueRejection>(&r)) {
                std::string who;
                for (const auto& id : rej->missing) who += (who.empty() ? "" : ",") + id;
                sim().trace(orch, "pre-verify-reject", ctx->plan.req.task_id + " " + who);
                abort_task(ctx, -1, "pre-verification:" + who, orch, orch);
                return;
            }
            deliver_sac(ctx, orch, std::get<IssuedSac>(std::move(r)));
        });
    }

    void deliver_sac(const Ctx& ctx, const NodeId& orch, IssuedSac issued) {
        const auto& req = ctx->plan.req;
        ctx->res.sac_issued_at = sim().now();
        for (const auto& ident : issued.hop_identities)
            ctx->hop_seal_keys[ident.id] = ident.seal_key;
        sim().trace(orch, "sac-issued", req.task_id);
        ctx->audit.push_back(
            {orch, {AuditOp::TaskStart, orch, req.hops.front().uav_id, -1, sim().now(), ""}});

        auto sac = std::make_shared<SecureAuthorizationCredential>(std::move(issued.sac));
        const NodeId first_es = w_.es_of(req.hops.front().domain_id);
        const NodeId first_uav = req.hops.front().uav_id;
        ctx->stage = "sac-delivery";
        // Same-server case degenerates to a zero-latency backbone hop.
        sim().send(orch, first_es, [this, ctx, sac, first_es, first_uav] {
            VirtualTime hold = 0;
            if (attacked_at(ctx, 0)) {
                const auto& kind = ctx->plan.attack->kind;
                if (kind == "tamper") {
                    flip_middle_byte(sac->sealed_path.bytes);
                } else if (kind == "impersonate") {
                    const NodeId ghost = ghost_of_.at(w_.domain_of(first_uav));
                    sac->orch_signature =
                        sign(w_.signing_secret(ghost), sac_signed_bytes(*sac), ghost);
                } else if (kind == "replay") {
                    hold = cfg().protocol.sac_ttl_ms + 1;  // park it past expiry
                }
            }
            VirtualTime wire = sim().delay_between(first_es, first_uav);
            sim().schedule(hold + wire, first_uav,
                           [this, ctx, sac, first_uav] { check_sac(ctx, *sac, first_uav); });
        });
    }

    void check_sac(const Ctx& ctx, const SecureAuthorizationCredential& sac,
                   const NodeId& uav) {
        ctx->stage = "hop0-verify";
        auto boxed = std::make_shared<SecureAuthorizationCredential>(sac);
        sim().schedule(proc().verify + proc().open, uav, [this, ctx, boxed, uav] {
            if (ctx->done) return;
            SacVerdict v = verify_sac(uav, w_.sealing_secret(uav), *boxed,
                                      w_.verify_key(ctx->res.orchestrator), sim().now());
            const NodeId via = w_.es_of(ctx->plan.req.hops.front().domain_id);
            if (auto* err = std::get_if<AuthError>(&v)) {
                sim().trace(uav, "reject",
                            ctx->plan.req.task_id + " hop=0 " +
                                std::string(auth_error_name(err->kind)));
                abort_task(ctx, 0, std::string(auth_error_name(err->kind)), via, uav);
                return;
            }
            grant(ctx, 0, uav);
        });
    }

    void grant(const Ctx& ctx, int hop, const NodeId& uav) {
        const auto& req = ctx->plan.req;
        ctx->auth = {req.task_id, uav, hop, sim().now()};
        ctx->res.hop_verified.push_back(sim().now());
        sim().trace(uav, "authorized", req.task_id + " hop=" + std::to_string(hop));
        if (hop > 0) {
            const NodeId sender = req.hops[std::size_t(hop) - 1].uav_id;
            const NodeId sender_es = w_.es_of(req.hops[std::size_t(hop) - 1].domain_id);
            ctx->audit.push_back(
                {sender_es, {AuditOp::Handover, sender, uav, hop, sim().now(), ""}});
        }
        if (hop + 1 == int(req.hops.size())) {
            complete(ctx, uav);
            return;
        }
        ctx->stage = "exec-hop" + std::to_string(hop);
        sim().schedule(proc().vnf_exec, uav, [this, ctx, hop] { handover(ctx, hop + 1); });
    }

    void handover(const Ctx& ctx, int hop) {
        const auto& req = ctx->plan.req;
        const NodeId sender = req.hops[std::size_t(hop) - 1].uav_id;
        const NodeId sender_es = w_.es_of(req.hops[std::size_t(hop) - 1].domain_id);
        const NodeId next = req.hops[std::size_t(hop)].uav_id;
        ctx->stage = "handover" + std::to_string(hop);
        sim().send(sender, sender_es, [this, ctx, hop, sender, sender_es, next] {
            std::int64_t service = proc().seal + proc().sign +
                                   (cfg().protocol.per_hop_es_check ? proc().ledger_read : 0);
            w_.es_queue(sender_es).enqueue(sim(), service, [this, ctx, hop, sender, sender_es,
                                                            next] {
                if (ctx->done) return;
                if (cfg().protocol.per_hop_es_check) {
                    QueryResult q = w_.ledger.query_batch({next}, sender_es);
                    if (!std::holds_alternative<AllRegistered>(q)) {
                        sim().trace(sender_es, "reject",
                                    ctx->plan.req.task_id + " hop=" + std::to_string(hop) +
                                        " revoked-or-unknown " + next);
                        abort_task(ctx, hop, "revoked-at-handover", sender_es, sender_es);
                        return;
                    }
                }
                auto key = ctx->hop_seal_keys.find(next);
                if (key == ctx->hop_seal_keys.end()) {
                    abort_task(ctx, hop, "no-cached-key", sender_es, sender_es);
                    return;
                }
                HcIssue issued = issue_hc(&ctx->auth, sender_es, w_.signing_secret(sender_es),
                                          next, key->second, ctx->plan.req.task_id, hop,
                                          remaining_path_digest(ctx->plan.req.hops,
                                                                std::size_t(hop)),
                                          sim().now());
                if (auto* err = std::get_if<AuthError>(&issued)) {
                    abort_task(ctx, hop, std::string(auth_error_name(err->kind)), sender_es,
                               sender_es);
                    return;
                }
                relay_hc(ctx, hop, sender, sender_es, next,
                         std::get<HandoverCredential>(std::move(issued)));
            });
        });
    }

    void relay_hc(const Ctx& ctx, int hop, const NodeId& sender, const NodeId& sender_es,
                  const NodeId& next, HandoverCredential hc) {
        auto token = std::make_shared<HandoverCredential>(std::move(hc));
        sim().send(sender_es, sender, [this, ctx, hop, sender, sender_es, next, token] {
            VirtualTime hold = 0;
            if (attacked_at(ctx, hop)) {
                const auto& kind = ctx->plan.attack->kind;
                if (kind == "tamper") {
                    flip_middle_byte(token->sealed_body.bytes);
                } else if (kind == "impersonate") {
                    const NodeId ghost = ghost_of_.at(w_.domain_of(sender));
                    token->domain_signature =
                        sign(w_.signing_secret(ghost), hc_signed_bytes(*token), sender_es);
                } else if (kind == "replay") {
                    hold = cfg().protocol.hc_freshness_ms + 1;
                }
            }
            VirtualTime wire = sim().delay_between(sender, next);
            sim().schedule(hold + wire, next, [this, ctx, hop, sender_es, next, token] {
                check_hc(ctx, hop, sender_es, next, *token);
            });
        });
    }

    void check_hc(const Ctx& ctx, int hop, const NodeId& sender_es, const NodeId& next,
                  const HandoverCredential& hc) {
        ctx->stage = "hop" + std::to_string(hop) + "-verify";
        auto token = std::make_shared<HandoverCredential>(hc);
        sim().schedule(proc().verify + proc().open, next, [this, ctx, hop, sender_es, next,
                                                           token] {
            if (ctx->done) return;
            HcVerdict v = verify_hc(next, w_.sealing_secret(next), *token,
                                    w_.verify_key(sender_es), sim().now(),
                                    cfg().protocol.hc_freshness_ms);
            if (auto* err = std::get_if<AuthError>(&v)) {
                sim().trace(next, "reject",
                            ctx->plan.req.task_id + " hop=" + std::to_string(hop) + " " +
                                std::string(auth_error_name(err->kind)));
                abort_task(ctx, hop, std::string(auth_error_name(err->kind)), sender_es, next);
                return;
            }
            grant(ctx, hop, next);
        });
    }

    void complete(const Ctx& ctx, const NodeId& last_uav) {
        ctx->res.completed = true;
        ctx->res.completed_at = sim().now();
        ctx->done = true;
        sim().trace(last_uav, "task-complete", ctx->plan.req.task_id);
        // Close the book: the last node notifies the orchestrator, which
        // appends the end attestation and pushes the whole trail on-chain.
        const NodeId orch = ctx->res.orchestrator;
        sim().send(last_uav, orch, [this, ctx, orch, last_uav] {
            ctx->audit.push_back(
                {orch, {AuditOp::TaskEnd, orch, last_uav, -1, sim().now(), ""}});
            push_audit(ctx, orch);
        });
    }

    void abort_task(const Ctx& ctx, int hop, const std::string& reason, const NodeId& via,
                    const NodeId& rejecting) {
        if (ctx->done) return;
        ctx->res.completed = false;
        ctx->res.abort_reason = reason;
        ctx->res.abort_hop = hop;
        ctx->done = true;
        sim().trace(via, "task-abort",
                    ctx->plan.req.task_id + " hop=" + std::to_string(hop) + " " + reason);
        if (cfg().scheme == SchemeId::CentralizedTa) return;  // nothing to audit
        ctx->audit.push_back(
            {via, {AuditOp::TaskAbort, via, rejecting, hop, sim().now(), reason}});
        push_audit(ctx, via);
    }

    void push_audit(const Ctx& ctx, const NodeId& reporter) {
        const TaskId task = ctx->plan.req.task_id;
        submit_audit(w_.ledger, task, ctx->audit, sim().now(),
                     [this, ctx, reporter, task](std::vector<SubmitResult> results) {
                         std::size_t committed = 0;
                         for (const auto& r : results)
                             if (std::holds_alternative<CommitReceipt>(r)) ++committed;
                         ctx->res.audited_at = sim().now();
                         sim().trace(reporter, "audit-committed",
                                     task + " records=" + std::to_string(committed) + "/" +
                                         std::to_string(results.size()));
                     });
    }

    // ---- centralized-ta: a registry round trip per hop ----

    void ta_round(const Ctx& ctx, int hop) {
        const auto& req = ctx->plan.req;
        const NodeId uav = req.hops[std::size_t(hop)].uav_id;
        ctx->stage = "ta-hop" + std::to_string(hop);
        // Request prep: the node signs its grant request.
        sim().schedule(proc().sign, uav, [this, ctx, hop, uav] {
            if (ctx->done) return;
            // Health probe instead of a request timeout: a dead authority is
            // detected at send time and the task aborts deterministically.
            if (!sim().is_live(kTrustedAuthorityId, sim().now())) {
                abort_task(ctx, hop, "authority-offline", uav, uav);
                return;
            }
            const Bytes msg = ta_request_bytes(ctx->plan.req.task_id, hop, uav);
            Signature sig = sign(w_.signing_secret(uav), msg, uav);
            sim().send(uav, kTrustedAuthorityId, [this, ctx, hop, uav, msg, sig] {
                w_.ta_queue.enqueue(sim(), proc().verify, [this, ctx, hop, uav, msg, sig] {
                    if (ctx->done) return;
                    ta_verify(ctx, hop, uav, msg, sig);
                });
            });
        });
    }

    void ta_verify(const Ctx& ctx, int hop, const NodeId& uav, const Bytes& msg,
                   const Signature& sig) {
        // The authority's registry is the genesis identity set; ghosts and
        // anything else never registered fail here.
        bool known = w_.identities.count(uav) > 0 &&
                     std::find(w_.built.ghost_ids.begin(), w_.built.ghost_ids.end(), uav) ==
                         w_.built.ghost_ids.end();
        if (!known || !verify(w_.verify_key(uav), msg, sig)) {
            sim().trace(kTrustedAuthorityId, "reject",
                        ctx->plan.req.task_id + " hop=" + std::to_string(hop) +
                            (known ? " bad-signature" : " unregistered"));
            abort_task(ctx, hop, known ? "bad-signature" : "unregistered",
                       kTrustedAuthorityId, uav);
            return;
        }
        sim().send(kTrustedAuthorityId, uav, [this, ctx, hop, uav] {
            if (ctx->done) return;
            ctx->res.hop_verified.push_back(sim().now());
            sim().trace(uav, "authorized",
                        ctx->plan.req.task_id + " hop=" + std::to_string(hop) + " via=ta");
            const auto& req = ctx->plan.req;
            if (hop + 1 == int(req.hops.size())) {
                ctx->res.completed = true;
                ctx->res.completed_at = sim().now();
                ctx->done = true;
                sim().trace(uav, "task-complete", req.task_id);
                return;
            }
            const NodeId next = req.hops[std::size_t(hop) + 1].uav_id;
            sim().schedule(proc().vnf_exec, uav, [this, ctx, hop, uav, next] {
                sim().send(uav, next, [this, ctx, hop] { ta_round(ctx, hop + 1); });
            });
        });
    }

    // ---- helpers ----

    static Bytes ta_request_bytes(const TaskId& task, int hop, const NodeId& uav) {
        return bytes_of("ta-req.v1\t" + task + "\t" + std::to_string(hop) + "\t" + uav);
    }

    bool attacked_at(const Ctx& ctx, int hop) const {
        return ctx->plan.attack && ctx->plan.attack->hop_index == hop &&
               ctx->plan.attack->kind != "unregistered";
    }

    static void flip_middle_byte(Bytes& b) {
        if (!b.empty()) b[b.size() / 2] ^= 0x01;
    }

    World& w_;
    std::map<DomainId, NodeId> ghost_of_;
    std::vector<Ctx> tasks_;
};

// One full run to quiescence. Results come back in plan order.
inline std::vector<TaskResult> run_plan(World& w, const WorkloadPlan& plan) {
    SchemeRunner runner(w, plan);
    runner.launch();
    w.sim.run();
    runner.finalize();
    return runner.results();
}

}  // namespace uavsfc
