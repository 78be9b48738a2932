#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aegis/common.hpp"
#include "aegis/envelope.hpp"

namespace aegis {

// ---------------------------------------------------------------------------
// Registry of agent and approver identities, signing keys, and build
// attestations. Signing uses a transparent keyed-MAC scheme (hmac-sha256
// where the registered key bytes are the MAC key) so tests can forge and
// corrupt signatures deliberately; the verification interface is scheme-
// agnostic.
// ---------------------------------------------------------------------------

struct RegisteredKey {
    std::string kid;
    std::string key_hex;  // MAC key material, hex
    std::string algorithm = "hmac-sha256";
    SimTime valid_from = 0;
    SimTime valid_to = kNever;
};

enum class IdentityStatus { active, revoked };

struct AgentIdentity {
    std::string spiffe_uri;
    std::string current_kid;
    IdentityStatus status = IdentityStatus::active;
    SimTime revoked_at = kNever;
};

struct Attestation {
    std::string subject;      // spiffe uri
    std::string code_digest;  // sha256 hex
    std::string build_ref;
    SimTime issued_at = 0;
    SimTime expires_at = 0;
    std::string attestor_signature_hex;
};

// `uri://slsa/attestations/<name>@sha256:<digest>` with <name> derived from
// the spiffe path ("spiffe://enterprise/orch/icam" -> "orch-icam").
std::string attestation_uri(const std::string& subject_spiffe, const std::string& code_digest);

std::string attestation_signing_bytes(const Attestation& a);

class IdentityRegistry {
public:
    IdentityRegistry();

    AgentIdentity register_identity(const std::string& spiffe_uri, RegisteredKey key);

    // Registers a new current key; old keys stay valid for their window so
    // historical signatures keep verifying.
    AgentIdentity rotate_key(const std::string& spiffe_uri, RegisteredKey key);

    // Idempotent; the first call pins revoked_at. Stored attestations and
    // events are untouched (revocation is not deletion).
    AgentIdentity revoke(const std::string& spiffe_uri, SimTime now);

    Attestation attest(const std::string& subject, const std::string& code_digest,
                       const std::string& build_ref, SimTime issued_at, SimTime expires_at);

    const AgentIdentity* find(const std::string& spiffe_uri) const;
    const RegisteredKey* find_key(const std::string& kid) const;
    const Attestation* find_attestation(const std::string& uri) const;
    // URI of the most recent attestation issued for the subject; empty if none.
    std::string current_attestation_uri(const std::string& subject) const;
    std::size_t identity_count() const { return identities_.size(); }

    // Signs with the identity's current key. Throws UnknownIdentity /
    // RevokedIdentity / UnknownKey.
    std::pair<std::string, std::string> sign(const std::string& spiffe_uri,
                                             const std::string& bytes, SimTime now) const;

    // True iff kid exists, belongs to the identity (when spiffe given), was
    // valid at `at`, and the MAC matches.
    bool verify_with_kid(const std::string& kid, const std::string& bytes,
                         const std::string& signature_hex, SimTime at) const;

    bool key_belongs_to(const std::string& kid, const std::string& spiffe_uri) const;

    // Provenance invariant check at time `now`: identity known and not
    // revoked as of `now`, signing kid valid at `now`, attestation resolves,
    // matches the subject, and is unexpired at `now`, and the caller's
    // signature check holds. Pass `emitted_at` of an event as `now` for
    // signing-time (historical) verification; later revocation then
    // surfaces as a note, not a failure.
    Verdict verify_provenance(const Provenance& prov, bool signature_check, SimTime now) const;

    // Approval verifier bound to this registry: approver_id is a registered
    // identity whose key at approved_at must MAC the approval bytes.
    ApprovalVerifier approval_verifier() const;

    json export_json() const;
    static IdentityRegistry import_json(const json& j);

    const RegisteredKey& attestor_key() const { return attestor_key_; }

private:
    std::map<std::string, AgentIdentity> identities_;
    std::map<std::string, RegisteredKey> keys_;
    std::map<std::string, std::vector<std::string>> identity_kids_;  // spiffe -> kids
    std::map<std::string, Attestation> attestations_;                // uri -> attestation
    std::map<std::string, std::string> current_attestation_;         // spiffe -> uri
    RegisteredKey attestor_key_;
};

}  // namespace aegis
