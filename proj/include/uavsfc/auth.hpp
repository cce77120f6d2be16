#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "uavsfc/bytes.hpp"
#include "uavsfc/core.hpp"
#include "uavsfc/crypto.hpp"
#include "uavsfc/ledger.hpp"
#include "uavsfc/simnet.hpp"

namespace uavsfc {

// Every way a credential check can fail, in the order the checks run:
// signature first (cheap, covers the ciphertext), then seal opening, then
// recipient identity, then the time window. ProtocolViolation is reserved for
// state errors on the issuing side — handing over without holding an
// authorization, or a sealed body that contradicts its own header.
enum class AuthErrorKind {
    SignatureInvalid,
    SealFailure,
    WrongRecipient,
    Expired,
    Stale,
    ProtocolViolation,
};

inline std::string_view auth_error_name(AuthErrorKind k) {
    switch (k) {
        case AuthErrorKind::SignatureInvalid: return "signature-invalid";
        case AuthErrorKind::SealFailure: return "seal-failure";
        case AuthErrorKind::WrongRecipient: return "wrong-recipient";
        case AuthErrorKind::Expired: return "expired";
        case AuthErrorKind::Stale: return "stale";
        case AuthErrorKind::ProtocolViolation: return "protocol-violation";
    }
    return "unknown";
}

struct AuthError {
    AuthErrorKind kind{AuthErrorKind::ProtocolViolation};
    std::string detail;
};

// Mission token handed to the first UAV of a service chain. The full hop list
// is sealed to that UAV alone; everyone else sees only the envelope. The
// orchestrator's signature covers the header fields and the ciphertext, so
// any in-flight edit trips the signature check before decryption is tried.
struct SecureAuthorizationCredential {
    TaskId task_id;
    NodeId orchestrator_id;
    VirtualTime not_before{0};
    VirtualTime not_after{0};
    SealedBox sealed_path;
    Signature orch_signature;
};

// Per-hop relay token. `next_recipient_id` is the UAV being handed to; the
// sender UAV carries the credential, so it learns exactly its successor and
// nothing further down the chain. The sealed body (task, hop, digest of the
// remaining path) opens only for the recipient. The sender domain's edge
// server signs over header plus ciphertext.
struct HandoverCredential {
    TaskId task_id;
    NodeId next_recipient_id;
    VirtualTime issued_at{0};
    int hop_index{0};
    SealedBox sealed_body;
    Signature domain_signature;
};

// Proof that a node passed every check of its phase; granted_at is the
// verifier's local virtual time when the last check passed.
struct ExecutionAuthorization {
    TaskId task_id;
    NodeId uav_id;
    int hop_index{0};
    VirtualTime granted_at{0};

    bool operator==(const ExecutionAuthorization&) const = default;
};

// Relay tokens must outlive one delivery leg or honest handovers go stale in
// transit; twice the worst one-way cross-domain latency leaves headroom for
// the intra-domain leg from the signing edge server back to the sender.
inline VirtualTime default_hc_freshness(const LatencyModel& lm) {
    return 2 * lm.inter_domain_ms;
}

// ---------------------------------------------------------------------------
// Canonical byte encodings. Tab/newline framed like the ledger formats; the
// leading tag keeps the three plaintext shapes mutually unconfusable. Node
// and task identifiers are assumed tab- and newline-free (enforced where
// configuration is parsed).

inline Bytes encode_hop_path(const std::vector<SfcHop>& hops) {
    std::string out = "path.v1";
    for (const auto& h : hops) {
        out += '\n';
        out += h.uav_id + "\t" + h.domain_id + "\t" + h.function_tag;
    }
    return bytes_of(out);
}

inline std::optional<std::vector<SfcHop>> decode_hop_path(const Bytes& plain) {
    auto lines = detail::split_on(string_of(plain), '\n');
    if (lines.empty() || lines[0] != "path.v1") return std::nullopt;
    std::vector<SfcHop> hops;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto f = detail::split_on(lines[i], '\t');
        if (f.size() != 3) return std::nullopt;
        hops.push_back({f[0], f[1], f[2]});
    }
    return hops;
}

// Digest of the chain suffix starting at `from_hop`; carried inside each
// relay token so audits can tie every hop back to the path the mission token
// sealed, without revealing that path to intermediate nodes.
inline Digest32 remaining_path_digest(const std::vector<SfcHop>& hops, std::size_t from_hop) {
    if (from_hop > hops.size()) throw std::invalid_argument("hop index past end of path");
    std::vector<SfcHop> rest(hops.begin() + static_cast<std::ptrdiff_t>(from_hop), hops.end());
    return digest(encode_hop_path(rest));
}

// Signature input for the mission token: every header field plus the sealed
// path ciphertext, hex-framed so the encoding is printable and unambiguous.
inline Bytes sac_signed_bytes(const SecureAuthorizationCredential& sac) {
    std::string out = "sac.v1\t" + sac.task_id + "\t" + sac.orchestrator_id + "\t" +
                      std::to_string(sac.not_before) + "\t" + std::to_string(sac.not_after) +
                      "\t" + to_hex(sac.sealed_path.bytes);
    return bytes_of(out);
}

// Signature input for a relay token: header fields plus ciphertext.
inline Bytes hc_signed_bytes(const HandoverCredential& hc) {
    std::string out = "hc.v1\t" + hc.task_id + "\t" + hc.next_recipient_id + "\t" +
                      std::to_string(hc.issued_at) + "\t" + std::to_string(hc.hop_index) + "\t" +
                      to_hex(hc.sealed_body.bytes);
    return bytes_of(out);
}

struct HcBody {
    TaskId task_id;
    int hop_index{0};
    Digest32 remaining;

    bool operator==(const HcBody&) const = default;
};

inline Bytes encode_hc_body(const HcBody& b) {
    return bytes_of("hop.v1\t" + b.task_id + "\t" + std::to_string(b.hop_index) + "\t" +
                    to_hex(b.remaining));
}

namespace detail {
inline std::optional<std::int64_t> parse_i64_opt(const std::string& s) {
    try {
        std::size_t used = 0;
        std::int64_t v = std::stoll(s, &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

inline std::optional<Digest32> digest_from_hex(const std::string& hex) {
    if (hex.size() != 64) return std::nullopt;
    try {
        Bytes raw = from_hex(hex);
        Digest32 d;
        std::copy(raw.begin(), raw.end(), d.begin());
        return d;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}
}  // namespace detail

inline std::optional<HcBody> decode_hc_body(const Bytes& plain) {
    auto f = detail::split_on(string_of(plain), '\t');
    if (f.size() != 4 || f[0] != "hop.v1") return std::nullopt;
    auto hop = detail::parse_i64_opt(f[2]);
    auto dig = detail::digest_from_hex(f[3]);
    if (!hop || *hop < 0 || *hop > 1'000'000 || !dig) return std::nullopt;
    HcBody b;
    b.task_id = f[1];
    b.hop_index = static_cast<int>(*hop);
    b.remaining = *dig;
    return b;
}

// ---------------------------------------------------------------------------
// Phase 1 — pre-verification and mission-token issuance.

// Low-level builder, shared by the issuing path and by tests that need
// deliberately inconsistent tokens (wrong recipient key, foreign path).
inline SecureAuthorizationCredential make_sac(const TaskId& task, const NodeId& orchestrator,
                                              const Bytes& orch_signing_secret,
                                              VirtualTime not_before, VirtualTime not_after,
                                              const std::vector<SfcHop>& path,
                                              const Bytes& recipient_seal_key) {
    if (not_before >= not_after) throw std::invalid_argument("empty credential validity window");
    SecureAuthorizationCredential sac;
    sac.task_id = task;
    sac.orchestrator_id = orchestrator;
    sac.not_before = not_before;
    sac.not_after = not_after;
    sac.sealed_path = seal(recipient_seal_key, encode_hop_path(path));
    sac.orch_signature = sign(orch_signing_secret, sac_signed_bytes(sac), orchestrator);
    return sac;
}

// Successful issuance also hands back the registry snapshot the single batch
// query produced; the task driver caches it so later hops verify against
// task-start keys instead of re-querying the chain per hop.
struct IssuedSac {
    SecureAuthorizationCredential sac;
    std::vector<NodeIdentity> hop_identities;  // sorted by id
};

struct IssueRejection {
    std::set<NodeId> missing;  // unregistered or revoked hop UAVs, all of them
};

using IssueResult = std::variant<IssuedSac, IssueRejection, ReplicaUnavailable>;

// One batch query over every hop UAV, then either a token sealed to the first
// hop or a rejection naming the full unsatisfied set. Nothing is issued on a
// partial pass, so a single bad hop leaves no credential anywhere.
inline IssueResult pre_verify_and_issue(const NodeId& orchestrator,
                                        const Bytes& orch_signing_secret, const SfcRequest& req,
                                        const ConsortiumLedger& ledger, VirtualTime now,
                                        VirtualTime sac_ttl) {
    if (req.hops.empty()) throw std::invalid_argument("request has no hops");
    std::set<NodeId> ids;
    for (const auto& h : req.hops) ids.insert(h.uav_id);

    QueryResult q = ledger.query_batch(ids, orchestrator);
    if (std::holds_alternative<ReplicaUnavailable>(q)) return ReplicaUnavailable{};
    if (auto* miss = std::get_if<Missing>(&q)) return IssueRejection{miss->ids};

    const auto& found = std::get<AllRegistered>(q).identities;
    const NodeId& first = req.hops.front().uav_id;
    auto it = std::find_if(found.begin(), found.end(),
                           [&](const NodeIdentity& n) { return n.id == first; });
    if (it == found.end()) throw std::logic_error("batch result omits first hop " + first);

    IssuedSac out;
    out.sac = make_sac(req.task_id, orchestrator, orch_signing_secret, now, now + sac_ttl,
                       req.hops, it->seal_key);
    out.hop_identities = found;
    return out;
}

// ---------------------------------------------------------------------------
// Phase 2 — mission-token verification at the first UAV.

struct SacAcceptance {
    ExecutionAuthorization authorization;
    std::vector<SfcHop> path;
};

using SacVerdict = std::variant<SacAcceptance, AuthError>;

// Checks run strictly in order — signature, seal, recipient, validity window
// — and the first failure wins. A replayed token past its window therefore
// still reports Expired, while any byte tamper reports SignatureInvalid.
inline SacVerdict verify_sac(const NodeId& uav, const Bytes& uav_seal_secret,
                             const SecureAuthorizationCredential& sac,
                             const Bytes& orch_verify_key, VirtualTime now) {
    if (!verify(orch_verify_key, sac_signed_bytes(sac), sac.orch_signature))
        return AuthError{AuthErrorKind::SignatureInvalid, "mission token signature rejected"};

    auto plain = open_sealed(uav_seal_secret, sac.sealed_path);
    if (!plain) return AuthError{AuthErrorKind::SealFailure, "sealed path would not open"};
    auto path = decode_hop_path(*plain);
    if (!path || path->empty())
        return AuthError{AuthErrorKind::SealFailure, "sealed path is malformed"};

    if (path->front().uav_id != uav)
        return AuthError{AuthErrorKind::WrongRecipient,
                         "path starts at " + path->front().uav_id + ", not " + uav};

    if (now < sac.not_before || now > sac.not_after)
        return AuthError{AuthErrorKind::Expired,
                         "t=" + std::to_string(now) + " outside [" +
                             std::to_string(sac.not_before) + ", " +
                             std::to_string(sac.not_after) + "]"};

    SacAcceptance ok;
    ok.authorization = {sac.task_id, uav, 0, now};
    ok.path = std::move(*path);
    return ok;
}

// ---------------------------------------------------------------------------
// Phase 3 — relay token issuance and verification.

using HcIssue = std::variant<HandoverCredential, AuthError>;

// The sender domain's edge server mints the relay token: body sealed to the
// recipient, then the signature laid over header plus ciphertext, so
// verifiers can reject before they decrypt. Refuses unless the sender holds
// the authorization for the hop immediately before the one being handed to.
inline HcIssue issue_hc(const ExecutionAuthorization* sender_auth, const NodeId& sender_es,
                        const Bytes& es_signing_secret, const NodeId& next_uav,
                        const Bytes& next_uav_seal_key, const TaskId& task, int hop_index,
                        const Digest32& remaining, VirtualTime now) {
    if (sender_auth == nullptr)
        return AuthError{AuthErrorKind::ProtocolViolation, "sender holds no authorization"};
    if (sender_auth->task_id != task)
        return AuthError{AuthErrorKind::ProtocolViolation,
                         "authorization is for task " + sender_auth->task_id + ", not " + task};
    if (sender_auth->hop_index != hop_index - 1)
        return AuthError{AuthErrorKind::ProtocolViolation,
                         "authorization covers hop " + std::to_string(sender_auth->hop_index) +
                             ", handover claims hop " + std::to_string(hop_index)};

    HandoverCredential hc;
    hc.task_id = task;
    hc.next_recipient_id = next_uav;
    hc.issued_at = now;
    hc.hop_index = hop_index;
    hc.sealed_body = seal(next_uav_seal_key, encode_hc_body({task, hop_index, remaining}));
    hc.domain_signature = sign(es_signing_secret, hc_signed_bytes(hc), sender_es);
    return hc;
}

using HcVerdict = std::variant<ExecutionAuthorization, AuthError>;

// Same fixed order as the mission token, with freshness in place of the
// validity window: signature, seal, recipient, |now - issued_at| <= delta.
// A body that opens cleanly but contradicts its own header can only come
// from the domain key holder itself, so it reports ProtocolViolation rather
// than stealing one of the transit-fault errors.
inline HcVerdict verify_hc(const NodeId& target_uav, const Bytes& uav_seal_secret,
                           const HandoverCredential& hc, const Bytes& sender_verify_key,
                           VirtualTime now, VirtualTime freshness_delta) {
    if (!verify(sender_verify_key, hc_signed_bytes(hc), hc.domain_signature))
        return AuthError{AuthErrorKind::SignatureInvalid, "relay token signature rejected"};

    auto plain = open_sealed(uav_seal_secret, hc.sealed_body);
    if (!plain) return AuthError{AuthErrorKind::SealFailure, "sealed body would not open"};
    auto body = decode_hc_body(*plain);
    if (!body) return AuthError{AuthErrorKind::SealFailure, "sealed body is malformed"};

    if (hc.next_recipient_id != target_uav)
        return AuthError{AuthErrorKind::WrongRecipient,
                         "token addresses " + hc.next_recipient_id + ", not " + target_uav};

    VirtualTime age = now >= hc.issued_at ? now - hc.issued_at : hc.issued_at - now;
    if (age > freshness_delta)
        return AuthError{AuthErrorKind::Stale, "token aged " + std::to_string(age) +
                                                   "ms against window " +
                                                   std::to_string(freshness_delta) + "ms"};

    if (body->task_id != hc.task_id || body->hop_index != hc.hop_index)
        return AuthError{AuthErrorKind::ProtocolViolation, "sealed body contradicts header"};

    return ExecutionAuthorization{hc.task_id, target_uav, hc.hop_index, now};
}

// ---------------------------------------------------------------------------
// Phase 4 — audit trail.

enum class AuditOp { TaskStart, Handover, TaskEnd, TaskAbort };

inline std::string_view audit_op_name(AuditOp op) {
    switch (op) {
        case AuditOp::TaskStart: return "start";
        case AuditOp::Handover: return "handover";
        case AuditOp::TaskEnd: return "end";
        case AuditOp::TaskAbort: return "abort";
    }
    return "unknown";
}

inline std::optional<AuditOp> audit_op_from(const std::string& s) {
    if (s == "start") return AuditOp::TaskStart;
    if (s == "handover") return AuditOp::Handover;
    if (s == "end") return AuditOp::TaskEnd;
    if (s == "abort") return AuditOp::TaskAbort;
    return std::nullopt;
}

// One attestation per protocol step: who acted, toward whom, at which hop
// and when. `note` is free text (an abort carries its reason there) and is
// flattened to keep the record single-line.
struct AuditEntry {
    AuditOp op{AuditOp::TaskStart};
    NodeId actor;
    NodeId peer;        // empty when the step has no counterpart
    int hop_index{-1};  // -1 for start/end/abort
    VirtualTime at{0};
    std::string note;

    bool operator==(const AuditEntry&) const = default;
};

inline Bytes encode_audit_entry(const TaskId& task, const AuditEntry& e) {
    std::string note = e.note;
    for (char& c : note)
        if (c == '\t' || c == '\n') c = ' ';
    return bytes_of("audit.v1\t" + task + "\t" + std::string(audit_op_name(e.op)) + "\t" +
                    e.actor + "\t" + e.peer + "\t" + std::to_string(e.hop_index) + "\t" +
                    std::to_string(e.at) + "\t" + note);
}

inline std::optional<std::pair<TaskId, AuditEntry>> decode_audit_entry(const Bytes& payload) {
    auto f = detail::split_on(string_of(payload), '\t');
    if (f.size() != 8 || f[0] != "audit.v1") return std::nullopt;
    auto op = audit_op_from(f[2]);
    auto hop = detail::parse_i64_opt(f[5]);
    auto at = detail::parse_i64_opt(f[6]);
    if (!op || !hop || !at) return std::nullopt;
    AuditEntry e;
    e.op = *op;
    e.actor = f[3];
    e.peer = f[4];
    e.hop_index = static_cast<int>(*hop);
    e.at = *at;
    e.note = f[7];
    return std::make_pair(f[1], e);
}

// A finished (or aborted) task submits each attestation through the edge
// server that witnessed it; `on_done` fires once every submission resolved,
// with results in submission order. Consensus failures surface in the slot
// of the record they hit — earlier commits are not rolled back.
struct AuditSubmission {
    NodeId via;
    AuditEntry entry;
};

inline void submit_audit(ConsortiumLedger& ledger, const TaskId& task,
                         const std::vector<AuditSubmission>& submissions,
                         VirtualTime submitted_at,
                         std::function<void(std::vector<SubmitResult>)> on_done) {
    if (submissions.empty()) {
        on_done({});
        return;
    }
    struct Pending {
        std::vector<std::optional<SubmitResult>> slots;
        std::size_t unresolved;
        std::function<void(std::vector<SubmitResult>)> done;
    };
    auto state = std::make_shared<Pending>();
    state->slots.resize(submissions.size());
    state->unresolved = submissions.size();
    state->done = std::move(on_done);

    for (std::size_t i = 0; i < submissions.size(); ++i) {
        auto rec = make_record(RecordKind::AuditEvent,
                               encode_audit_entry(task, submissions[i].entry), submitted_at);
        ledger.submit(rec, submissions[i].via, [state, i](SubmitResult r) {
            state->slots[i] = std::move(r);
            if (--state->unresolved > 0) return;
            std::vector<SubmitResult> results;
            results.reserve(state->slots.size());
            for (auto& s : state->slots) results.push_back(std::move(*s));
            state->done(std::move(results));
        });
    }
}

// Chain-order scan of every audit record on a replica.
inline std::vector<std::pair<TaskId, AuditEntry>> replay_audit(const ReplicaState& st) {
    std::vector<std::pair<TaskId, AuditEntry>> out;
    for (const auto& b : st.chain)
        for (const auto& rec : b.records) {
            if (rec.kind != RecordKind::AuditEvent) continue;
            auto decoded = decode_audit_entry(rec.payload);
            if (!decoded)
                throw DumpParseError("undecodable audit record at height " +
                                     std::to_string(b.height));
            out.push_back(std::move(*decoded));
        }
    return out;
}

// Reconstructs one task's timeline from the chain. Attestations carry their
// own event times, so ordering by (at, hop) recovers the original sequence
// even when different edge servers committed them out of arrival order.
inline std::vector<AuditEntry> audit_for_task(const ReplicaState& st, const TaskId& task) {
    std::vector<AuditEntry> out;
    for (auto& [t, e] : replay_audit(st))
        if (t == task) out.push_back(std::move(e));
    std::stable_sort(out.begin(), out.end(), [](const AuditEntry& a, const AuditEntry& b) {
        return std::tie(a.at, a.hop_index) < std::tie(b.at, b.hop_index);
    });
    return out;
}

}  // namespace uavsfc
