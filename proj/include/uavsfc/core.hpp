#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavsfc/bytes.hpp"

namespace uavsfc {

// Simulated clock value, integer milliseconds. Integer so that event ordering
// is exact and reruns are byte-identical.
using VirtualTime = std::int64_t;

using NodeId = std::string;
using DomainId = std::string;
using TaskId = std::string;

enum class Role { Uav, EdgeServer, TrustedAuthority };

enum class IdentityStatus { Registered, Revoked };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::Uav: return "uav";
        case Role::EdgeServer: return "es";
        case Role::TrustedAuthority: return "ta";
    }
    return "?";
}

struct NodeIdentity {
    NodeId id;
    Role role{Role::Uav};
    DomainId domain_id;  // empty for the trusted authority
    Bytes verify_key;
    Bytes seal_key;
    IdentityStatus status{IdentityStatus::Registered};
};

struct DomainDescriptor {
    DomainId domain_id;
    NodeId es_id;
    std::set<NodeId> uav_ids;
};

struct SfcHop {
    NodeId uav_id;
    DomainId domain_id;
    std::string function_tag;

    bool operator==(const SfcHop&) const = default;
};

struct SfcRequest {
    TaskId task_id;
    std::vector<SfcHop> hops;
    NodeId requester_id;
    VirtualTime issued_at{0};
};

class TopologyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration; `field` names the offending path
// (e.g. "latency.inter_domain_ms").
class ConfigError : public std::runtime_error {
  public:
    ConfigError(std::string field_path, const std::string& what)
        : std::runtime_error(field_path + ": " + what), field(std::move(field_path)) {}

    std::string field;
};

// Edge-server mesh with per-link one-way latencies. Distances are
// precomputed all-pairs so election scoring and the latency model can
// query them cheaply and deterministically.
class EsTopology {
  public:
    struct Link {
        NodeId a;
        NodeId b;
        std::int64_t latency_ms{0};
    };

    EsTopology(std::vector<NodeId> es_ids, const std::vector<Link>& links) {
        std::sort(es_ids.begin(), es_ids.end());
        es_ids.erase(std::unique(es_ids.begin(), es_ids.end()), es_ids.end());
        ids_ = std::move(es_ids);
        if (ids_.empty()) throw TopologyError("topology needs at least one edge server");
        for (std::size_t i = 0; i < ids_.size(); ++i) index_[ids_[i]] = i;

        const std::size_t n = ids_.size();
        const std::int64_t inf = kUnreachable;
        hop_.assign(n, std::vector<std::int64_t>(n, inf));
        lat_.assign(n, std::vector<std::int64_t>(n, inf));
        for (std::size_t i = 0; i < n; ++i) hop_[i][i] = lat_[i][i] = 0;

        for (const auto& l : links) {
            if (l.latency_ms <= 0) throw TopologyError("link latency must be positive");
            auto ia = index_.find(l.a);
            auto ib = index_.find(l.b);
            if (ia == index_.end() || ib == index_.end())
                throw TopologyError("link references unknown edge server");
            if (ia->second == ib->second) throw TopologyError("self-link on " + l.a);
            std::size_t i = ia->second, j = ib->second;
            hop_[i][j] = hop_[j][i] = std::min<std::int64_t>(hop_[i][j], 1);
            lat_[i][j] = lat_[j][i] = std::min(lat_[i][j], l.latency_ms);
        }

        // Floyd–Warshall on both metrics; n is small (tens of servers).
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    if (hop_[i][k] < inf && hop_[k][j] < inf)
                        hop_[i][j] = std::min(hop_[i][j], hop_[i][k] + hop_[k][j]);
                    if (lat_[i][k] < inf && lat_[k][j] < inf)
                        lat_[i][j] = std::min(lat_[i][j], lat_[i][k] + lat_[k][j]);
                }

        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (hop_[i][j] >= inf)
                    throw TopologyError("topology is not connected: " + ids_[i] + " / " + ids_[j]);
    }

    const std::vector<NodeId>& es_ids() const { return ids_; }

    bool contains(const NodeId& es) const { return index_.count(es) > 0; }

    // Shortest-path link count between two edge servers.
    std::int64_t hop_distance(const NodeId& a, const NodeId& b) const {
        return hop_[at(a)][at(b)];
    }

    // Shortest-path one-way latency (ms) between two edge servers.
    std::int64_t path_latency(const NodeId& a, const NodeId& b) const {
        return lat_[at(a)][at(b)];
    }

  private:
    static constexpr std::int64_t kUnreachable = (1ll << 40);

    std::size_t at(const NodeId& es) const {
        auto it = index_.find(es);
        if (it == index_.end()) throw TopologyError("unknown edge server " + es);
        return it->second;
    }

    std::vector<NodeId> ids_;
    std::map<NodeId, std::size_t> index_;
    std::vector<std::vector<std::int64_t>> hop_;
    std::vector<std::vector<std::int64_t>> lat_;
};

struct ValidationResult {
    std::vector<std::string> violations;

    bool valid() const { return violations.empty(); }
};

// Checks task id presence and that every hop's UAV really belongs to the
// domain that hop claims. All violations are reported, none is fatal.
inline ValidationResult validate_request(const SfcRequest& req,
                                         const std::vector<DomainDescriptor>& domains) {
    ValidationResult res;
    if (req.task_id.empty()) res.violations.push_back("empty task_id");
    if (req.hops.empty()) res.violations.push_back("request has no hops");

    std::map<DomainId, const DomainDescriptor*> by_id;
    for (const auto& d : domains) by_id[d.domain_id] = &d;

    for (std::size_t i = 0; i < req.hops.size(); ++i) {
        const auto& hop = req.hops[i];
        auto it = by_id.find(hop.domain_id);
        if (it == by_id.end()) {
            res.violations.push_back("unknown domain at hop " + std::to_string(i));
            continue;
        }
        if (!it->second->uav_ids.count(hop.uav_id))
            res.violations.push_back("membership mismatch at hop " + std::to_string(i));
    }
    return res;
}

// Domain ids in first-appearance order, deduplicated. This is the
// "administrative domain metadata" that drives candidate filtering.
inline std::vector<DomainId> traversed_domains(const SfcRequest& req) {
    std::vector<DomainId> out;
    std::set<DomainId> seen;
    for (const auto& hop : req.hops)
        if (seen.insert(hop.domain_id).second) out.push_back(hop.domain_id);
    return out;
}

}  // namespace uavsfc
