#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavsfc/core.hpp"

namespace uavsfc {

class NoSuchEvent : public std::logic_error {
  public:
    NoSuchEvent() : std::logic_error("cancel of an unknown or already-fired event") {}
};

class RunawaySimulation : public std::runtime_error {
  public:
    explicit RunawaySimulation(std::uint64_t cap)
        : std::runtime_error("event count exceeded safety limit " + std::to_string(cap)) {}
};

// Virtual-ms prices for node-local work. consensus_phase defaults to the
// backbone link latency so a consensus round is dominated by message time.
struct ProcCosts {
    std::int64_t sign{1};
    std::int64_t verify{1};
    std::int64_t seal{1};
    std::int64_t open{1};
    std::int64_t ledger_read{2};
    std::int64_t consensus_phase{10};
    std::int64_t vnf_exec{5};
};

// One-way delivery delays. Cross-domain traffic is priced an order of
// magnitude above local traffic; the backbone between edge servers uses
// per-link latencies from the topology instead of a flat constant.
struct LatencyModel {
    std::int64_t intra_domain_ms{2};
    std::int64_t inter_domain_ms{20};
    std::int64_t es_link_ms{10};
    std::int64_t ta_link_ms{30};
    ProcCosts proc;
};

struct CrashWindow {
    NodeId node;
    VirtualTime crash_at{0};
    std::optional<VirtualTime> recover_at;
};

using FailureScript = std::vector<CrashWindow>;

// Append-only run log. Lines are tab-separated (time, line counter, actor,
// event, detail) under a version header; byte-stable across reruns.
class TraceLog {
  public:
    TraceLog() { buf_ = "# uavsfc-trace v1\n"; }

    void line(VirtualTime t, const std::string& actor, std::string_view event,
              std::string_view detail) {
        buf_ += std::to_string(t);
        buf_ += '\t';
        buf_ += std::to_string(next_++);
        buf_ += '\t';
        append_clean(actor);
        buf_ += '\t';
        append_clean(event);
        buf_ += '\t';
        append_clean(detail);
        buf_ += '\n';
    }

    const std::string& text() const { return buf_; }

  private:
    void append_clean(std::string_view s) {
        for (char c : s) buf_ += (c == '\t' || c == '\n' || c == '\r') ? ' ' : c;
    }

    std::string buf_;
    std::uint64_t next_{0};
};

// Reproducible randomness. All bounded draws go through rejection sampling
// on the raw engine output; std:: distributions are implementation-defined
// and would break cross-toolchain reproducibility.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below(0)");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double unit() { return double(eng_() >> 11) * 0x1.0p-53; }

    // Exponential inter-arrival gap rounded to whole milliseconds.
    std::int64_t exp_ms(double mean_ms) {
        double u = unit();
        return std::llround(-std::log1p(-u) * mean_ms);
    }

  private:
    std::mt19937_64 eng_;
};

using EventId = std::uint64_t;
using EventFn = std::function<void()>;

// Single-threaded discrete-event kernel. Events fire in (fire_at, seq)
// order, which makes every run a pure function of (scenario, seed).
class Simulator {
  public:
    explicit Simulator(FailureScript failures = {}, TraceLog* trace = nullptr,
                       std::uint64_t max_events = 300'000'000)
        : failures_(std::move(failures)), trace_(trace), max_events_(max_events) {}

    VirtualTime now() const { return now_; }

    void set_latency_model(LatencyModel m) { model_ = m; }
    const LatencyModel& latency_model() const { return model_; }

    void set_topology(const EsTopology* topo) { topo_ = topo; }

    void register_node(const NodeId& id, Role role, DomainId domain) {
        nodes_[id] = NodeInfo{role, std::move(domain)};
    }

    // Liveness per the failure script: crash_at is inclusive, recover_at
    // exclusive. A node without script entries is always live.
    bool is_live(const NodeId& id, VirtualTime t) const {
        for (const auto& w : failures_) {
            if (w.node != id) continue;
            if (t >= w.crash_at && (!w.recover_at || t < *w.recover_at)) return false;
        }
        return true;
    }

    // Schedules fn at now + delay_ms. An event owned by a node is skipped if
    // that node is dead when it fires; owner "" marks run-level bookkeeping
    // that always executes.
    EventId schedule(std::int64_t delay_ms, NodeId owner, EventFn fn) {
        if (delay_ms < 0) throw std::invalid_argument("negative event delay");
        EventId id = next_id_++;
        heap_.push(HeapEntry{now_ + delay_ms, next_seq_++, id});
        bodies_.emplace(id, Body{std::move(owner), std::move(fn)});
        return id;
    }

    void cancel(EventId id) {
        auto it = bodies_.find(id);
        if (it == bodies_.end()) throw NoSuchEvent();
        bodies_.erase(it);
    }

    // True while the event is still queued. An event stops being pending once
    // it fires, is cancelled, or lapses because its owner was dead at fire
    // time — holders of an EventId across a possible owner crash should check
    // before cancelling.
    bool pending(EventId id) const { return bodies_.count(id) != 0; }

    // One-way message. The delay depends on the endpoint roles and domains:
    // anything touching the trusted authority pays ta_link_ms, ES↔ES pays the
    // shortest backbone path, same-domain pairs pay intra_domain_ms, the rest
    // pay inter_domain_ms. Sends from a dead src and deliveries to a dead dst
    // are dropped.
    void send(const NodeId& src, const NodeId& dst, EventFn on_deliver) {
        if (!is_live(src, now_)) return;
        schedule(delay_between(src, dst), dst, std::move(on_deliver));
    }

    std::int64_t delay_between(const NodeId& a, const NodeId& b) const {
        const NodeInfo& na = info(a);
        const NodeInfo& nb = info(b);
        if (na.role == Role::TrustedAuthority || nb.role == Role::TrustedAuthority)
            return model_.ta_link_ms;
        if (na.role == Role::EdgeServer && nb.role == Role::EdgeServer) {
            if (!topo_) throw TopologyError("no topology set for ES backbone send");
            return topo_->path_latency(a, b);
        }
        if (!na.domain.empty() && na.domain == nb.domain) return model_.intra_domain_ms;
        return model_.inter_domain_ms;
    }

    void trace(const std::string& actor, std::string_view event, std::string_view detail) {
        if (trace_) trace_->line(now_, actor, event, detail);
    }

    // Drains the queue (quiescence) and returns the final clock value.
    VirtualTime run() { return drain(std::nullopt); }

    // Processes everything scheduled up to and including `until`, then
    // advances the clock to `until` even if the queue emptied earlier.
    VirtualTime run_until(VirtualTime until) {
        drain(until);
        now_ = std::max(now_, until);
        return now_;
    }

    std::uint64_t events_processed() const { return processed_; }

  private:
    struct NodeInfo {
        Role role{Role::Uav};
        DomainId domain;
    };

    struct Body {
        NodeId owner;
        EventFn fn;
    };

    struct HeapEntry {
        VirtualTime fire_at;
        std::uint64_t seq;
        EventId id;

        bool operator>(const HeapEntry& o) const {
            return std::tie(fire_at, seq) > std::tie(o.fire_at, o.seq);
        }
    };

    const NodeInfo& info(const NodeId& id) const {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw std::invalid_argument("unregistered node " + id);
        return it->second;
    }

    VirtualTime drain(std::optional<VirtualTime> until) {
        while (!heap_.empty()) {
            const HeapEntry top = heap_.top();
            if (until && top.fire_at > *until) break;
            heap_.pop();
            if (++processed_ > max_events_) throw RunawaySimulation(max_events_);

            auto it = bodies_.find(top.id);
            if (it == bodies_.end()) continue;  // cancelled
            now_ = std::max(now_, top.fire_at);
            Body body = std::move(it->second);
            bodies_.erase(it);
            if (!body.owner.empty() && !is_live(body.owner, now_)) continue;
            body.fn();
        }
        return now_;
    }

    FailureScript failures_;
    TraceLog* trace_{nullptr};
    std::uint64_t max_events_;
    LatencyModel model_;
    const EsTopology* topo_{nullptr};
    std::map<NodeId, NodeInfo> nodes_;

    std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> heap_;
    std::map<EventId, Body> bodies_;
    VirtualTime now_{0};
    std::uint64_t next_seq_{0};
    EventId next_id_{1};
    std::uint64_t processed_{0};
};

// Single-server FIFO queue in front of one node's processor. Used where a
// node is an explicit bottleneck (the centralized authority, an edge server
// doing orchestration work); everything else is priced latency-only.
class WorkQueue {
  public:
    explicit WorkQueue(NodeId resource) : resource_(std::move(resource)) {}

    // Returns the completion time. `done` is skipped if the resource is dead
    // when the job would finish, which models work lost to a crash.
    VirtualTime enqueue(Simulator& sim, std::int64_t service_ms, EventFn done) {
        VirtualTime start = std::max(sim.now(), busy_until_);
        busy_until_ = start + service_ms;
        sim.schedule(busy_until_ - sim.now(), resource_, std::move(done));
        return busy_until_;
    }

    VirtualTime busy_until() const { return busy_until_; }
    const NodeId& resource() const { return resource_; }

  private:
    NodeId resource_;
    VirtualTime busy_until_{0};
};

}  // namespace uavsfc
