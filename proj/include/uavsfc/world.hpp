#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavsfc/crypto.hpp"
#include "uavsfc/ledger.hpp"
#include "uavsfc/scenario.hpp"
#include "uavsfc/simnet.hpp"

// Everything a run needs, wired together from a scenario: the simulator and
// trace, the backbone topology, per-node key material, the consortium ledger
// with its genesis block, and the single-server work queues that make edge
// servers and the trusted authority real bottlenecks instead of infinitely
// parallel oracles.

namespace uavsfc {

class World {
  public:
    explicit World(const ScenarioConfig& raw)
        : cfg(validated(raw.normalized())),
          built(build_topology(cfg.topology)),
          sim(to_failures(cfg), &trace),
          topo(built.es_ids, built.links),
          ledger(sim, topo,
                 ConsortiumLedger::Config{cfg.consensus.fault_budget,
                                          cfg.consensus.view_timeout_ms,
                                          cfg.consensus.batch_size}) {
        sim.set_latency_model(cfg.latency);
        sim.set_topology(&topo);

        add_node(kTrustedAuthorityId, Role::TrustedAuthority, "");
        for (std::size_t i = 0; i < built.domains.size(); ++i) {
            const auto& d = built.domains[i];
            add_node(d.es_id, Role::EdgeServer, d.domain_id);
            for (const auto& u : d.uav_ids) add_node(u, Role::Uav, d.domain_id);
            // Ghosts are live network endpoints with sound keys, but their
            // identities never reach the genesis block.
            add_node(built.ghost_ids[i], Role::Uav, d.domain_id);
            es_queues.emplace(d.es_id, WorkQueue(d.es_id));
        }

        std::vector<NodeIdentity> genesis;
        for (const auto& [id, ident] : identities) {
            bool ghost = std::find(built.ghost_ids.begin(), built.ghost_ids.end(), id) !=
                         built.ghost_ids.end();
            if (!ghost) genesis.push_back(ident);
        }
        ledger.install_genesis(genesis);
    }

    World(const World&) = delete;
    World& operator=(const World&) = delete;

    const NodeId& es_of(const DomainId& d) const {
        auto it = es_by_domain_.find(d);
        if (it == es_by_domain_.end()) throw TopologyError("no edge server for domain " + d);
        return it->second;
    }

    const DomainId& domain_of(const NodeId& n) const {
        auto it = domain_by_node_.find(n);
        if (it == domain_by_node_.end()) throw TopologyError("unknown node " + n);
        return it->second;
    }

    const NodeIdentity& identity(const NodeId& n) const {
        auto it = identities.find(n);
        if (it == identities.end()) throw TopologyError("no identity for " + n);
        return it->second;
    }

    const Bytes& verify_key(const NodeId& n) const { return identity(n).verify_key; }
    const Bytes& seal_key(const NodeId& n) const { return identity(n).seal_key; }

    const Bytes& signing_secret(const NodeId& n) const { return signing_.at(n).secret_part; }
    const Bytes& sealing_secret(const NodeId& n) const { return sealing_.at(n).secret_part; }

    WorkQueue& es_queue(const NodeId& es) {
        auto it = es_queues.find(es);
        if (it == es_queues.end()) throw TopologyError("no work queue for " + es);
        return it->second;
    }

    // Lexicographically first ES: the canonical replica for dumps and the
    // default statically-configured orchestrator.
    const NodeId& first_es() const { return topo.es_ids().front(); }

    ScenarioConfig cfg;  // normalized copy; single source of derived defaults
    BuiltTopology built;
    TraceLog trace;
    Simulator sim;
    EsTopology topo;
    ConsortiumLedger ledger;
    std::map<NodeId, NodeIdentity> identities;  // ghosts included, genesis excludes them
    std::map<NodeId, WorkQueue> es_queues;
    WorkQueue ta_queue{kTrustedAuthorityId};

  private:
    static ScenarioConfig validated(ScenarioConfig c) {
        c.validate();
        return c;
    }

    static FailureScript to_failures(const ScenarioConfig& c) {
        FailureScript out;
        for (const auto& f : c.failures) out.push_back({f.node, f.crash_at_ms, f.recover_at_ms});
        return out;
    }

    void add_node(const NodeId& id, Role role, const DomainId& domain) {
        sim.register_node(id, role, domain);
        domain_by_node_[id] = domain;
        if (role == Role::EdgeServer) es_by_domain_[domain] = id;

        // Key material is a pure function of (scenario seed, node id), so two
        // runs of the same scenario share every byte of every credential.
        auto seed_for = [&](const char* kind) {
            Digest32 d = digest("uavsfc.key.v1\t" + std::to_string(cfg.seed) + "\t" + kind +
                                "\t" + id);
            return Bytes(d.begin(), d.end());
        };
        static_assert(kSeedBytes == 32, "key seeds are one digest wide");
        KeyPair sig = keygen(seed_for("sign"), KeyKind::Signing);
        KeyPair seal = keygen(seed_for("seal"), KeyKind::Sealing);

        NodeIdentity ident;
        ident.id = id;
        ident.role = role;
        ident.domain_id = domain;
        ident.verify_key = sig.public_part;
        ident.seal_key = seal.public_part;
        identities[id] = ident;
        signing_[id] = std::move(sig);
        sealing_[id] = std::move(seal);
    }

    std::map<NodeId, KeyPair> signing_;
    std::map<NodeId, KeyPair> sealing_;
    std::map<DomainId, NodeId> es_by_domain_;
    std::map<NodeId, DomainId> domain_by_node_;
};

}  // namespace uavsfc
