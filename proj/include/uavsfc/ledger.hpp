#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <variant>
#include <vector>

#include "uavsfc/crypto.hpp"
#include "uavsfc/simnet.hpp"

namespace uavsfc {

enum class RecordKind { IdentityRegistration, IdentityRevocation, AuditEvent };

inline const char* record_kind_name(RecordKind k) {
    switch (k) {
        case RecordKind::IdentityRegistration: return "reg";
        case RecordKind::IdentityRevocation: return "rev";
        case RecordKind::AuditEvent: return "audit";
    }
    return "?";
}

inline std::optional<RecordKind> record_kind_from(std::string_view s) {
    if (s == "reg") return RecordKind::IdentityRegistration;
    if (s == "rev") return RecordKind::IdentityRevocation;
    if (s == "audit") return RecordKind::AuditEvent;
    return std::nullopt;
}

struct LedgerRecord {
    Digest32 record_id{};
    RecordKind kind{RecordKind::AuditEvent};
    Bytes payload;
    VirtualTime submitted_at{0};

    bool operator==(const LedgerRecord&) const = default;
};

inline LedgerRecord make_record(RecordKind kind, Bytes payload, VirtualTime submitted_at) {
    LedgerRecord r;
    r.kind = kind;
    r.record_id = digest(payload);
    r.payload = std::move(payload);
    r.submitted_at = submitted_at;
    return r;
}

struct LedgerBlock {
    std::int64_t height{0};
    Digest32 prev_hash{};
    std::vector<LedgerRecord> records;
    VirtualTime committed_at{0};

    bool operator==(const LedgerBlock&) const = default;
};

// Canonical block text: the hash input, and (with a trailing hash column)
// the dump line. Payloads are hex, records comma-joined, "-" when empty.
inline std::string serialize_block(const LedgerBlock& b) {
    std::string out = std::to_string(b.height);
    out += '\t';
    out += to_hex(b.prev_hash);
    out += '\t';
    out += std::to_string(b.committed_at);
    out += '\t';
    if (b.records.empty()) {
        out += '-';
    } else {
        for (std::size_t i = 0; i < b.records.size(); ++i) {
            const auto& r = b.records[i];
            if (i) out += ',';
            out += record_kind_name(r.kind);
            out += ':';
            out += std::to_string(r.submitted_at);
            out += ':';
            out += to_hex(r.record_id);
            out += ':';
            out += to_hex(r.payload);
        }
    }
    return out;
}

inline Digest32 block_hash(const LedgerBlock& b) { return digest(bytes_of(serialize_block(b))); }

// Identity payload codecs. Registrations carry the full identity so a
// replica can rebuild its registry from the chain alone.
inline Bytes encode_registration(const NodeIdentity& n) {
    std::string s = "reg\t";
    s += n.id;
    s += '\t';
    s += role_name(n.role);
    s += '\t';
    s += n.domain_id;
    s += '\t';
    s += to_hex(n.verify_key);
    s += '\t';
    s += to_hex(n.seal_key);
    return bytes_of(s);
}

inline NodeIdentity decode_registration(const Bytes& payload) {
    std::string s = string_of(payload);
    std::vector<std::string> f;
    std::size_t pos = 0;
    while (true) {
        auto tab = s.find('\t', pos);
        f.push_back(s.substr(pos, tab == std::string::npos ? tab : tab - pos));
        if (tab == std::string::npos) break;
        pos = tab + 1;
    }
    if (f.size() != 6 || f[0] != "reg")
        throw std::invalid_argument("malformed registration payload");
    NodeIdentity n;
    n.id = f[1];
    if (f[2] == "uav") n.role = Role::Uav;
    else if (f[2] == "es") n.role = Role::EdgeServer;
    else if (f[2] == "ta") n.role = Role::TrustedAuthority;
    else throw std::invalid_argument("unknown role in registration payload");
    n.domain_id = f[3];
    n.verify_key = from_hex(f[4]);
    n.seal_key = from_hex(f[5]);
    n.status = IdentityStatus::Registered;
    return n;
}

inline Bytes encode_revocation(const NodeId& id) { return bytes_of("rev\t" + id); }

inline NodeId decode_revocation(const Bytes& payload) {
    std::string s = string_of(payload);
    if (s.rfind("rev\t", 0) != 0) throw std::invalid_argument("malformed revocation payload");
    return s.substr(4);
}

struct ReplicaState {
    NodeId es_id;
    std::vector<LedgerBlock> chain;
    Digest32 head_hash{};
    std::size_t view{0};
    std::deque<LedgerRecord> pending;
};

// Link/structure integrity of one replica's chain. Returns the first broken
// height, or nullopt when the chain is intact. A mid-chain tamper surfaces at
// the successor whose prev_hash stops matching; a tampered head is caught by
// the stored head hash.
inline std::optional<std::int64_t> verify_chain(const ReplicaState& r) {
    const auto& chain = r.chain;
    if (chain.empty()) return std::nullopt;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (chain[i].height != std::int64_t(i)) return std::int64_t(i);
        if (i == 0) {
            if (chain[0].prev_hash != Digest32{}) return 0;
        } else if (chain[i].prev_hash != block_hash(chain[i - 1])) {
            return std::int64_t(i);
        }
    }
    if (block_hash(chain.back()) != r.head_hash) return chain.back().height;
    return std::nullopt;
}

inline constexpr std::string_view kLedgerDumpHeader = "# uavsfc-ledger v1";

class DumpParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {
inline std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        auto at = s.find(sep, pos);
        out.push_back(s.substr(pos, at == std::string::npos ? at : at - pos));
        if (at == std::string::npos) break;
        pos = at + 1;
    }
    return out;
}

inline std::int64_t parse_i64(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        std::int64_t v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DumpParseError(std::string("bad ") + what + ": '" + s + "'");
    }
}
}  // namespace detail

// One line per block under a version header; the trailing column pins each
// line with its own block hash.
inline std::string dump_chain(const ReplicaState& r) {
    std::string out(kLedgerDumpHeader);
    out += '\n';
    for (const auto& b : r.chain) {
        out += serialize_block(b);
        out += '\t';
        out += to_hex(block_hash(b));
        out += '\n';
    }
    return out;
}

struct ParsedDump {
    std::vector<LedgerBlock> blocks;
    std::vector<Digest32> line_hashes;  // the stored per-line hash column
};

inline ParsedDump parse_dump(const std::string& text) {
    auto lines = detail::split_on(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || lines[0] != kLedgerDumpHeader)
        throw DumpParseError("missing ledger dump header");

    ParsedDump out;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        auto f = detail::split_on(lines[li], '\t');
        if (f.size() != 5) throw DumpParseError("line " + std::to_string(li) + ": want 5 fields");
        LedgerBlock b;
        b.height = detail::parse_i64(f[0], "height");
        auto read_digest = [&](const std::string& hex, const char* what) {
            Bytes raw;
            try {
                raw = from_hex(hex);
            } catch (const std::exception&) {
                throw DumpParseError(std::string("bad ") + what + " hex");
            }
            if (raw.size() != 32) throw DumpParseError(std::string("bad ") + what + " length");
            Digest32 d;
            std::copy(raw.begin(), raw.end(), d.begin());
            return d;
        };
        b.prev_hash = read_digest(f[1], "prev_hash");
        b.committed_at = detail::parse_i64(f[2], "committed_at");
        if (f[3] != "-") {
            for (const auto& rf : detail::split_on(f[3], ',')) {
                auto parts = detail::split_on(rf, ':');
                if (parts.size() != 4) throw DumpParseError("bad record field");
                LedgerRecord rec;
                auto kind = record_kind_from(parts[0]);
                if (!kind) throw DumpParseError("unknown record kind '" + parts[0] + "'");
                rec.kind = *kind;
                rec.submitted_at = detail::parse_i64(parts[1], "submitted_at");
                rec.record_id = read_digest(parts[2], "record_id");
                try {
                    rec.payload = from_hex(parts[3]);
                } catch (const std::exception&) {
                    throw DumpParseError("bad payload hex");
                }
                b.records.push_back(std::move(rec));
            }
        }
        out.blocks.push_back(std::move(b));
        out.line_hashes.push_back(read_digest(f[4], "block_hash"));
    }
    return out;
}

// Integrity check of a parsed dump. Link structure is checked first (a
// mid-chain tamper surfaces at its successor), then every line is re-hashed
// against its stored hash column, which covers the head block and the hash
// column itself. Returns the first broken height, nullopt when intact.
inline std::optional<std::int64_t> verify_dump(const ParsedDump& d) {
    for (std::size_t i = 0; i < d.blocks.size(); ++i) {
        if (d.blocks[i].height != std::int64_t(i)) return std::int64_t(i);
        if (i == 0) {
            if (d.blocks[0].prev_hash != Digest32{}) return 0;
        } else if (d.blocks[i].prev_hash != block_hash(d.blocks[i - 1])) {
            return std::int64_t(i);
        }
    }
    for (std::size_t i = 0; i < d.blocks.size(); ++i) {
        if (block_hash(d.blocks[i]) != d.line_hashes[i]) return std::int64_t(i);
        for (const auto& rec : d.blocks[i].records)
            if (digest(rec.payload) != rec.record_id) return std::int64_t(i);
    }
    return std::nullopt;
}

struct CommitReceipt {
    std::int64_t height{0};
    VirtualTime commit_time{0};
};

struct ConsensusFailure {
    std::string reason;
};

struct AlreadyRegistered {
    NodeId id;
};

struct UnknownIdentity {
    NodeId id;
};

using SubmitResult = std::variant<CommitReceipt, ConsensusFailure>;
using RegisterResult =
    std::variant<CommitReceipt, ConsensusFailure, AlreadyRegistered, UnknownIdentity>;

struct AllRegistered {
    std::vector<NodeIdentity> identities;  // sorted by id
};

struct Missing {
    std::set<NodeId> ids;
};

struct ReplicaUnavailable {};

using QueryResult = std::variant<AllRegistered, Missing, ReplicaUnavailable>;

// Replicated append-only ledger over the edge-server mesh. Commit follows a
// simplified three-phase BFT pattern: the primary ships whole blocks in
// pre-prepare, every replica echoes prepare then commit, and 2f+1 matching
// votes (own vote included) advance each step. Faults are crash-silent;
// timeouts rotate the primary round-robin without certificate exchange, and
// the next primary re-proposes whatever is still pending.
class ConsortiumLedger {
  public:
    struct Config {
        int fault_budget{-1};           // -1: largest f with 3f+1 <= replica count
        std::int64_t view_timeout_ms{0};  // 0: 10 x max pairwise backbone latency
        int batch_size{1};
    };

    using ReceiptFn = std::function<void(SubmitResult)>;
    using RegisterFn = std::function<void(RegisterResult)>;

    ConsortiumLedger(Simulator& sim, const EsTopology& topo)
        : ConsortiumLedger(sim, topo, Config()) {}

    ConsortiumLedger(Simulator& sim, const EsTopology& topo, Config cfg)
        : sim_(sim), topo_(topo), cfg_(cfg) {
        for (const auto& id : topo.es_ids()) {
            replicas_.emplace(id, Replica{});
            replicas_[id].st.es_id = id;
        }
        order_ = topo.es_ids();  // already sorted
        const int n = int(order_.size());
        if (cfg_.fault_budget < 0) cfg_.fault_budget = std::max(0, (n - 1) / 3);
        if (n < 3 * cfg_.fault_budget + 1)
            throw std::invalid_argument("too few replicas for fault budget");
        if (cfg_.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
        if (cfg_.view_timeout_ms <= 0) {
            std::int64_t worst = 0;
            for (const auto& a : order_)
                for (const auto& b : order_) worst = std::max(worst, topo.path_latency(a, b));
            cfg_.view_timeout_ms = 10 * std::max<std::int64_t>(worst, 1);
        }
    }

    const Config& config() const { return cfg_; }
    int quorum() const { return 2 * cfg_.fault_budget + 1; }

    // Offline initialization: block 0 carries the initial identity set and is
    // installed on every replica directly, before the network goes live.
    void install_genesis(const std::vector<NodeIdentity>& initial, VirtualTime at = 0) {
        LedgerBlock genesis;
        genesis.height = 0;
        genesis.prev_hash = Digest32{};
        genesis.committed_at = at;
        for (const auto& n : initial)
            genesis.records.push_back(
                make_record(RecordKind::IdentityRegistration, encode_registration(n), at));
        for (auto& [id, rep] : replicas_) append_block(rep, genesis);
    }

    // Fire-and-callback: the REQUEST fans out from `via` to every replica and
    // the receipt fires when `via` executes the commit. A dead `via` produces
    // no receipt at all (the caller observes a stall, as a real client would).
    void submit(const LedgerRecord& rec, const NodeId& via, ReceiptFn on_done) {
        Replica& v = replica_at(via);
        v.requests.emplace(rec.record_id, Tracked{std::move(on_done), v.st.view});
        for (const auto& dst : order_) {
            if (dst == via) {
                Replica* self = &v;
                LedgerRecord copy = rec;
                sim_.schedule(0, via, [this, self, copy] { on_request(*self, copy); });
            } else {
                sim_.send(via, dst, [this, dst, rec] { on_request(replicas_[dst], rec); });
            }
        }
    }

    void register_identity(const NodeIdentity& ident, const NodeId& via, RegisterFn on_done) {
        Replica& v = replica_at(via);
        auto it = v.registry.find(ident.id);
        if (it != v.registry.end() && it->second.status == IdentityStatus::Registered) {
            NodeId id = ident.id;
            sim_.schedule(0, via, [on_done, id] { on_done(AlreadyRegistered{id}); });
            return;
        }
        auto rec = make_record(RecordKind::IdentityRegistration, encode_registration(ident),
                               sim_.now());
        submit(rec, via, [on_done](SubmitResult r) {
            std::visit([&](auto v) { on_done(RegisterResult{std::move(v)}); }, std::move(r));
        });
    }

    void revoke_identity(const NodeId& id, const NodeId& via, RegisterFn on_done) {
        Replica& v = replica_at(via);
        auto it = v.registry.find(id);
        if (it == v.registry.end() || it->second.status != IdentityStatus::Registered) {
            sim_.schedule(0, via, [on_done, id] { on_done(UnknownIdentity{id}); });
            return;
        }
        auto rec = make_record(RecordKind::IdentityRevocation, encode_revocation(id), sim_.now());
        submit(rec, via, [on_done](SubmitResult r) {
            std::visit([&](auto v) { on_done(RegisterResult{std::move(v)}); }, std::move(r));
        });
    }

    // Atomic read against the local committed prefix of `at`: all ids
    // registered and unrevoked, or the full set of unsatisfied ids.
    QueryResult query_batch(const std::set<NodeId>& ids, const NodeId& at) const {
        auto it = replicas_.find(at);
        if (it == replicas_.end()) throw std::invalid_argument("unknown replica " + at);
        if (!sim_.is_live(at, sim_.now())) return ReplicaUnavailable{};
        Missing missing;
        AllRegistered ok;
        for (const auto& id : ids) {
            auto r = it->second.registry.find(id);
            if (r == it->second.registry.end() || r->second.status != IdentityStatus::Registered)
                missing.ids.insert(id);
            else
                ok.identities.push_back(r->second);
        }
        if (!missing.ids.empty()) return missing;
        return ok;
    }

    const ReplicaState& replica(const NodeId& es) const {
        auto it = replicas_.find(es);
        if (it == replicas_.end()) throw std::invalid_argument("unknown replica " + es);
        return it->second.st;
    }

    // Test hook: mutable access for tamper experiments.
    ReplicaState& mutable_replica(const NodeId& es) { return replica_at(es).st; }

  private:
    struct Tracked {
        ReceiptFn fn;
        std::size_t start_view;
    };

    using PhaseKey = std::tuple<std::size_t, std::int64_t, Digest32>;  // view, height, digest

    struct Replica {
        ReplicaState st;
        std::map<NodeId, NodeIdentity> registry;
        std::set<Digest32> executed;
        std::map<Digest32, std::int64_t> record_height;
        std::map<Digest32, std::size_t> first_seen_view;
        std::map<std::int64_t, LedgerBlock> holdback;

        std::map<std::pair<std::size_t, std::int64_t>, LedgerBlock> proposed;  // by (view, height)
        std::map<PhaseKey, std::set<NodeId>> prepares;
        std::map<PhaseKey, std::set<NodeId>> commits;
        std::set<PhaseKey> prepare_sent;
        std::set<PhaseKey> commit_sent;
        std::set<std::pair<std::size_t, std::int64_t>> executed_heights_guard;

        std::map<std::size_t, std::set<NodeId>> view_votes;
        std::optional<EventId> timer;
        int futile_fires{0};
        std::int64_t last_fetch_floor{-1};
        bool pass_scheduled{false};                  // primary only
        std::int64_t next_height{0};                 // primary only
        Digest32 last_proposed_hash{};               // primary only
        std::set<Digest32> proposed_in_view;         // primary only
        std::map<Digest32, Tracked> requests;        // via role
    };

    Replica& replica_at(const NodeId& id) {
        auto it = replicas_.find(id);
        if (it == replicas_.end()) throw std::invalid_argument("unknown replica " + id);
        return it->second;
    }

    NodeId primary_of(std::size_t view) const { return order_[view % order_.size()]; }
    bool is_primary(const Replica& r) const { return primary_of(r.st.view) == r.st.es_id; }

    void broadcast(const Replica& from, std::function<void(Replica&)> deliver) {
        for (const auto& dst : order_) {
            if (dst == from.st.es_id) continue;
            sim_.send(from.st.es_id, dst, [this, dst, deliver] { deliver(replicas_[dst]); });
        }
    }

    // ---- request / propose ----

    void on_request(Replica& r, const LedgerRecord& rec) {
        if (r.executed.count(rec.record_id) || r.first_seen_view.count(rec.record_id)) {
            check_request_done(r, rec.record_id);
            return;
        }
        r.first_seen_view.emplace(rec.record_id, r.st.view);
        r.st.pending.push_back(rec);
        arm_timer(r);
        if (is_primary(r)) try_propose(r);
    }

    // One proposal pass per processing slot: the pass batches whatever is
    // pending when it runs, ships one block, and re-schedules itself while
    // unproposed records remain. Serializing passes both prices the
    // primary's work and lets bursts coalesce into batches.
    void try_propose(Replica& p) {
        if (!is_primary(p) || p.pass_scheduled) return;
        if (!has_unproposed(p)) return;
        p.pass_scheduled = true;
        const std::size_t view = p.st.view;
        NodeId self = p.st.es_id;
        sim_.schedule(sim_.latency_model().proc.consensus_phase, self, [this, self, view] {
            Replica& p2 = replicas_[self];
            p2.pass_scheduled = false;
            if (p2.st.view != view || !is_primary(p2)) return;
            propose_pass(p2);
        });
    }

    bool has_unproposed(const Replica& p) const {
        for (const auto& rec : p.st.pending)
            if (!p.proposed_in_view.count(rec.record_id) && !p.executed.count(rec.record_id))
                return true;
        return false;
    }

    void propose_pass(Replica& p) {
        if (p.next_height < std::int64_t(p.st.chain.size())) {
            p.next_height = std::int64_t(p.st.chain.size());
            p.last_proposed_hash = p.st.head_hash;
        }
        std::vector<LedgerRecord> batch;
        for (const auto& rec : p.st.pending) {
            if (p.proposed_in_view.count(rec.record_id)) continue;
            if (p.executed.count(rec.record_id)) continue;
            batch.push_back(rec);
            if (int(batch.size()) >= cfg_.batch_size) break;
        }
        if (batch.empty()) return;

        LedgerBlock b;
        b.height = p.next_height++;
        b.prev_hash = b.height == 0 ? Digest32{} : p.last_proposed_hash;
        b.committed_at = sim_.now();
        b.records = batch;
        p.last_proposed_hash = block_hash(b);
        for (const auto& rec : batch) p.proposed_in_view.insert(rec.record_id);

        const std::size_t view = p.st.view;
        on_preprepare(p, view, b);
        broadcast(p, [this, view, b](Replica& dst) { on_preprepare(dst, view, b); });
        try_propose(p);  // more pending -> next pass, one slot later
    }

    // ---- three phases ----
    // Shortest-path latencies satisfy the triangle inequality, so a replica
    // always sees the pre-prepare (one hop from the primary) before any
    // prepare echoing it (primary -> echoer -> here, plus processing). Votes
    // that somehow arrive early are still banked and re-checked when the
    // block lands.

    void on_preprepare(Replica& r, std::size_t view, const LedgerBlock& b) {
        if (view != r.st.view) return;
        if (b.height < std::int64_t(r.st.chain.size())) return;  // already committed
        auto key = std::make_pair(view, b.height);
        if (r.proposed.count(key)) return;  // replay
        r.proposed[key] = b;

        PhaseKey pk{view, b.height, block_hash(b)};
        r.prepares[pk].insert(r.st.es_id);
        schedule_phase(r, view, [this, pk](Replica& self) {
            if (!self.prepare_sent.insert(pk).second) return;
            broadcast(self, [this, pk, from = self.st.es_id](Replica& dst) {
                on_prepare(dst, pk, from);
            });
            check_prepared(self, pk);
        });
    }

    void on_prepare(Replica& r, const PhaseKey& pk, const NodeId& from) {
        if (std::get<0>(pk) != r.st.view) return;
        r.prepares[pk].insert(from);
        check_prepared(r, pk);
    }

    void check_prepared(Replica& r, const PhaseKey& pk) {
        if (int(r.prepares[pk].size()) < quorum()) return;
        if (!r.proposed.count({std::get<0>(pk), std::get<1>(pk)})) return;
        if (!r.commit_sent.insert(pk).second) return;
        r.commits[pk].insert(r.st.es_id);
        schedule_phase(r, std::get<0>(pk), [this, pk](Replica& self) {
            broadcast(self, [this, pk, from = self.st.es_id](Replica& dst) {
                on_commit(dst, pk, from);
            });
            check_committed(self, pk);
        });
    }

    void on_commit(Replica& r, const PhaseKey& pk, const NodeId& from) {
        if (std::get<0>(pk) != r.st.view) return;
        r.commits[pk].insert(from);
        check_committed(r, pk);
    }

    void check_committed(Replica& r, const PhaseKey& pk) {
        if (int(r.commits[pk].size()) < quorum()) return;
        auto key = std::make_pair(std::get<0>(pk), std::get<1>(pk));
        auto prop = r.proposed.find(key);
        if (prop == r.proposed.end()) return;
        if (!r.executed_heights_guard.insert(key).second) return;
        deliver_block(r, prop->second);
    }

    void schedule_phase(Replica& r, std::size_t view, std::function<void(Replica&)> fn) {
        NodeId self = r.st.es_id;
        sim_.schedule(sim_.latency_model().proc.consensus_phase, self, [this, self, view, fn] {
            Replica& r2 = replicas_[self];
            if (r2.st.view != view) return;
            fn(r2);
        });
    }

    // ---- commit / execute ----

    void deliver_block(Replica& r, const LedgerBlock& b) {
        if (b.height < std::int64_t(r.st.chain.size())) return;
        r.holdback[b.height] = b;
        while (true) {
            auto it = r.holdback.find(std::int64_t(r.st.chain.size()));
            if (it == r.holdback.end()) break;
            LedgerBlock blk = it->second;
            r.holdback.erase(it);
            append_block(r, blk);
        }
        // A residual hold-back entry means a height below it never reached
        // us (commit raced a view change). Ask the peers for the gap.
        if (!r.holdback.empty()) request_catchup(r, false);
    }

    void append_block(Replica& r, const LedgerBlock& b) {
        LedgerBlock stored = b;
        stored.height = std::int64_t(r.st.chain.size());
        // Blocks ship whole from one primary, so heights normally line up.
        stored.prev_hash = r.st.chain.empty() ? Digest32{} : r.st.head_hash;
        r.st.chain.push_back(stored);
        r.st.head_hash = block_hash(stored);

        for (const auto& rec : stored.records) {
            if (!r.executed.insert(rec.record_id).second) continue;
            r.record_height[rec.record_id] = stored.height;
            apply_record(r, rec);
            drop_pending(r, rec.record_id);
            check_request_done(r, rec.record_id);
        }
        // Local progress: reset the no-progress window and give-up counters.
        r.futile_fires = 0;
        r.last_fetch_floor = -1;
        disarm_timer(r);
        if (!r.st.pending.empty()) arm_timer(r);
        if (is_primary(r)) try_propose(r);
    }

    // ---- catch-up ----
    // Honest chains are prefixes of one another under the crash-silent fault
    // model, so a laggard may copy committed blocks from any peer.

    void request_catchup(Replica& r, bool force) {
        const std::int64_t from = std::int64_t(r.st.chain.size());
        if (!force && r.last_fetch_floor == from) return;
        r.last_fetch_floor = from;
        broadcast(r, [this, from, requester = r.st.es_id](Replica& peer) {
            on_fetch(peer, from, requester);
        });
    }

    void on_fetch(Replica& peer, std::int64_t from, const NodeId& requester) {
        if (std::int64_t(peer.st.chain.size()) <= from) return;
        std::vector<LedgerBlock> blocks(peer.st.chain.begin() + from, peer.st.chain.end());
        sim_.send(peer.st.es_id, requester, [this, requester, blocks] {
            Replica& r = replicas_[requester];
            for (const auto& b : blocks) deliver_block(r, b);
        });
    }

    void apply_record(Replica& r, const LedgerRecord& rec) {
        if (rec.kind == RecordKind::IdentityRegistration) {
            NodeIdentity n = decode_registration(rec.payload);
            auto it = r.registry.find(n.id);
            // A revoked identity stays revoked; registration does not resurrect it.
            if (it != r.registry.end() && it->second.status == IdentityStatus::Revoked) return;
            r.registry[n.id] = n;
        } else if (rec.kind == RecordKind::IdentityRevocation) {
            NodeId id = decode_revocation(rec.payload);
            auto it = r.registry.find(id);
            if (it != r.registry.end()) it->second.status = IdentityStatus::Revoked;
            else {
                NodeIdentity tomb;
                tomb.id = id;
                tomb.status = IdentityStatus::Revoked;
                r.registry[id] = tomb;
            }
        }
        // Audit events don't touch the registry.
    }

    void drop_pending(Replica& r, const Digest32& id) {
        for (auto it = r.st.pending.begin(); it != r.st.pending.end(); ++it)
            if (it->record_id == id) {
                r.st.pending.erase(it);
                return;
            }
    }

    void check_request_done(Replica& r, const Digest32& id) {
        auto it = r.requests.find(id);
        if (it == r.requests.end()) return;
        auto at = r.record_height.find(id);
        if (at == r.record_height.end()) return;
        ReceiptFn fn = std::move(it->second.fn);
        r.requests.erase(it);
        fn(CommitReceipt{at->second, sim_.now()});
    }

    // ---- view changes ----

    void arm_timer(Replica& r) {
        // A stored id whose event already lapsed (the replica was down when it
        // came due) must not block re-arming after recovery.
        if (r.timer && sim_.pending(*r.timer)) return;
        r.timer.reset();
        NodeId self = r.st.es_id;
        r.timer = sim_.schedule(cfg_.view_timeout_ms, self, [this, self] {
            Replica& r2 = replicas_[self];
            r2.timer.reset();
            if (r2.st.pending.empty()) return;
            // Deadness backstop: when view changes can't reach quorum (too
            // many peers down), stop spinning and report failure locally.
            if (++r2.futile_fires >= 3 * int(order_.size())) {
                give_up(r2);
                return;
            }
            if (!r2.holdback.empty()) request_catchup(r2, true);
            vote_view_change(r2, r2.st.view + 1);
            arm_timer(r2);
        });
    }

    void give_up(Replica& r) {
        r.st.pending.clear();
        auto requests = std::move(r.requests);
        r.requests.clear();
        for (auto& [id, tracked] : requests)
            if (!r.executed.count(id))
                tracked.fn(ConsensusFailure{"no quorum; request abandoned after repeated timeouts"});
    }

    void disarm_timer(Replica& r) {
        if (r.timer && sim_.pending(*r.timer)) sim_.cancel(*r.timer);
        r.timer.reset();
    }

    void vote_view_change(Replica& r, std::size_t target) {
        r.view_votes[target].insert(r.st.es_id);
        broadcast(r, [this, target, from = r.st.es_id](Replica& dst) {
            on_view_vote(dst, target, from);
        });
        maybe_enter_view(r, target);
    }

    void on_view_vote(Replica& r, std::size_t target, const NodeId& from) {
        if (target <= r.st.view) return;
        r.view_votes[target].insert(from);
        maybe_enter_view(r, target);
    }

    void maybe_enter_view(Replica& r, std::size_t target) {
        if (target <= r.st.view) return;
        if (int(r.view_votes[target].size()) < quorum()) return;
        r.st.view = target;
        r.proposed_in_view.clear();
        r.next_height = std::int64_t(r.st.chain.size());
        r.last_proposed_hash = r.st.head_hash;
        expire_stale(r);
        disarm_timer(r);
        if (!r.st.pending.empty()) arm_timer(r);
        if (is_primary(r)) try_propose(r);
    }

    // After a full rotation (n views) without commit, give up: report
    // ConsensusFailure for tracked requests and drop the stale pending
    // records so timers quiesce.
    void expire_stale(Replica& r) {
        const std::size_t n = order_.size();
        for (auto it = r.requests.begin(); it != r.requests.end();) {
            if (r.st.view >= it->second.start_view + n && !r.executed.count(it->first)) {
                ReceiptFn fn = std::move(it->second.fn);
                it = r.requests.erase(it);
                fn(ConsensusFailure{"no quorum after full primary rotation"});
            } else {
                ++it;
            }
        }
        for (auto it = r.st.pending.begin(); it != r.st.pending.end();) {
            auto seen = r.first_seen_view.find(it->record_id);
            if (seen != r.first_seen_view.end() && r.st.view >= seen->second + n)
                it = r.st.pending.erase(it);
            else
                ++it;
        }
    }

    Simulator& sim_;
    const EsTopology& topo_;
    Config cfg_;
    std::vector<NodeId> order_;
    std::map<NodeId, Replica> replicas_;
};

}  // namespace uavsfc
