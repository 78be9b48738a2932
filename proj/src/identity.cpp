#include "aegis/identity.hpp"

#include <algorithm>

#include "aegis/sha256.hpp"

namespace aegis {

std::string attestation_uri(const std::string& subject_spiffe, const std::string& code_digest) {
    std::string name = subject_spiffe;
    const std::string scheme = "spiffe://";
    if (name.rfind(scheme, 0) == 0) name = name.substr(scheme.size());
    auto slash = name.find('/');
    if (slash != std::string::npos) name = name.substr(slash + 1);  // drop trust domain
    std::replace(name.begin(), name.end(), '/', '-');
    return "uri://slsa/attestations/" + name + "@sha256:" + code_digest;
}

std::string attestation_signing_bytes(const Attestation& a) {
    std::string out = "attestation";
    out.push_back('\x1f');
    out += a.subject;
    out.push_back('\x1f');
    out += a.code_digest;
    out.push_back('\x1f');
    out += a.build_ref;
    out.push_back('\x1f');
    out += std::to_string(a.issued_at);
    out.push_back('\x1f');
    out += std::to_string(a.expires_at);
    return out;
}

IdentityRegistry::IdentityRegistry() {
    attestor_key_.kid = "kid-attestor-root-01";
    attestor_key_.key_hex = sha256_hex("attestor-root-key");
}

AgentIdentity IdentityRegistry::register_identity(const std::string& spiffe_uri,
                                                  RegisteredKey key) {
    if (spiffe_uri.empty() || key.kid.empty())
        fail(Errc::empty_identifier, "spiffe_uri and kid must be nonempty");
    if (identities_.count(spiffe_uri))
        fail(Errc::duplicate_identity, spiffe_uri + " already registered");
    if (keys_.count(key.kid)) fail(Errc::duplicate_identity, "kid " + key.kid + " already in use");
    if (key.valid_from >= key.valid_to)
        fail(Errc::config_error, "key validity window empty for " + key.kid);
    AgentIdentity id;
    id.spiffe_uri = spiffe_uri;
    id.current_kid = key.kid;
    identities_[spiffe_uri] = id;
    identity_kids_[spiffe_uri].push_back(key.kid);
    keys_[key.kid] = std::move(key);
    return id;
}

AgentIdentity IdentityRegistry::rotate_key(const std::string& spiffe_uri, RegisteredKey key) {
    auto it = identities_.find(spiffe_uri);
    if (it == identities_.end()) fail(Errc::unknown_identity, spiffe_uri);
    if (keys_.count(key.kid)) fail(Errc::duplicate_identity, "kid " + key.kid + " already in use");
    identity_kids_[spiffe_uri].push_back(key.kid);
    keys_[key.kid] = std::move(key);
    it->second.current_kid = identity_kids_[spiffe_uri].back();
    return it->second;
}

AgentIdentity IdentityRegistry::revoke(const std::string& spiffe_uri, SimTime now) {
    auto it = identities_.find(spiffe_uri);
    if (it == identities_.end()) fail(Errc::unknown_identity, spiffe_uri);
    if (it->second.status != IdentityStatus::revoked) {
        it->second.status = IdentityStatus::revoked;
        it->second.revoked_at = now;
    }
    return it->second;
}

Attestation IdentityRegistry::attest(const std::string& subject, const std::string& code_digest,
                                     const std::string& build_ref, SimTime issued_at,
                                     SimTime expires_at) {
    auto it = identities_.find(subject);
    if (it == identities_.end()) fail(Errc::unknown_identity, subject);
    if (it->second.status == IdentityStatus::revoked) fail(Errc::revoked_identity, subject);
    if (issued_at >= expires_at) fail(Errc::config_error, "attestation validity window empty");
    Attestation a;
    a.subject = subject;
    a.code_digest = code_digest;
    a.build_ref = build_ref;
    a.issued_at = issued_at;
    a.expires_at = expires_at;
    a.attestor_signature_hex =
        hmac_sha256_hex(from_hex(attestor_key_.key_hex), attestation_signing_bytes(a));
    std::string uri = attestation_uri(subject, code_digest);
    attestations_[uri] = a;
    current_attestation_[subject] = uri;
    return a;
}

std::string IdentityRegistry::current_attestation_uri(const std::string& subject) const {
    auto it = current_attestation_.find(subject);
    return it == current_attestation_.end() ? std::string() : it->second;
}

const AgentIdentity* IdentityRegistry::find(const std::string& spiffe_uri) const {
    auto it = identities_.find(spiffe_uri);
    return it == identities_.end() ? nullptr : &it->second;
}

const RegisteredKey* IdentityRegistry::find_key(const std::string& kid) const {
    auto it = keys_.find(kid);
    return it == keys_.end() ? nullptr : &it->second;
}

const Attestation* IdentityRegistry::find_attestation(const std::string& uri) const {
    auto it = attestations_.find(uri);
    return it == attestations_.end() ? nullptr : &it->second;
}

std::pair<std::string, std::string> IdentityRegistry::sign(const std::string& spiffe_uri,
                                                           const std::string& bytes,
                                                           SimTime now) const {
    const auto* id = find(spiffe_uri);
    if (!id) fail(Errc::unknown_identity, spiffe_uri);
    if (id->status == IdentityStatus::revoked && id->revoked_at <= now)
        fail(Errc::revoked_identity, spiffe_uri);
    const auto* key = find_key(id->current_kid);
    if (!key) fail(Errc::unknown_key, id->current_kid);
    return {key->kid, hmac_sha256_hex(from_hex(key->key_hex), bytes)};
}

bool IdentityRegistry::verify_with_kid(const std::string& kid, const std::string& bytes,
                                       const std::string& signature_hex, SimTime at) const {
    const auto* key = find_key(kid);
    if (!key) return false;
    if (at < key->valid_from || at >= key->valid_to) return false;
    return hmac_sha256_hex(from_hex(key->key_hex), bytes) == signature_hex;
}

bool IdentityRegistry::key_belongs_to(const std::string& kid, const std::string& spiffe_uri) const {
    auto it = identity_kids_.find(spiffe_uri);
    if (it == identity_kids_.end()) return false;
    return std::find(it->second.begin(), it->second.end(), kid) != it->second.end();
}

Verdict IdentityRegistry::verify_provenance(const Provenance& prov, bool signature_check,
                                            SimTime now) const {
    Verdict v;
    const auto* id = find(prov.producer_spiffe);
    if (!id) {
        v.fail("UnknownIdentity", prov.producer_spiffe, "identity not registered");
    } else if (id->status == IdentityStatus::revoked) {
        if (id->revoked_at <= now)
            v.fail("RevokedIdentity", prov.producer_spiffe, "identity revoked");
        else
            v.note("RevokedAfterSigning", prov.producer_spiffe,
                   "identity revoked after the verification time");
    }

    const auto* key = find_key(prov.signing_kid);
    if (!key || !key_belongs_to(prov.signing_kid, prov.producer_spiffe) ||
        now < key->valid_from || now >= key->valid_to) {
        v.fail("UnknownKey", prov.signing_kid, "signing key unknown or outside validity window");
    }

    const auto* att = find_attestation(prov.attestation_ref);
    if (!att || att->subject != prov.producer_spiffe) {
        v.fail("StaleAttestation", prov.attestation_ref,
               "attestation missing or bound to a different identity");
    } else if (now < att->issued_at || now >= att->expires_at) {
        v.fail("StaleAttestation", prov.attestation_ref, "attestation expired or not yet valid");
    } else {
        std::string expect =
            hmac_sha256_hex(from_hex(attestor_key_.key_hex), attestation_signing_bytes(*att));
        if (expect != att->attestor_signature_hex)
            v.fail("StaleAttestation", prov.attestation_ref, "attestor signature invalid");
    }

    if (!signature_check) v.fail("BadSignature", prov.producer_spiffe, "event signature invalid");
    return v;
}

ApprovalVerifier IdentityRegistry::approval_verifier() const {
    return [this](const Approval& a, const std::string& task_id) {
        const auto* id = find(a.approver_id);
        if (!id) return false;
        // Approvals verify against the key valid at approval time; approver
        // revocation after the fact does not erase a recorded cosign.
        auto it = identity_kids_.find(a.approver_id);
        if (it == identity_kids_.end()) return false;
        std::string bytes = approval_signing_bytes(task_id, a);
        for (const auto& kid : it->second) {
            if (verify_with_kid(kid, bytes, a.signature_hex, a.approved_at)) return true;
        }
        return false;
    };
}

json IdentityRegistry::export_json() const {
    json j;
    j["identities"] = json::array();
    for (const auto& [uri, id] : identities_) {
        json e{{"spiffe_uri", id.spiffe_uri},
               {"current_kid", id.current_kid},
               {"status", id.status == IdentityStatus::active ? "active" : "revoked"}};
        if (id.status == IdentityStatus::revoked) e["revoked_at"] = id.revoked_at;
        e["kids"] = identity_kids_.at(uri);
        j["identities"].push_back(std::move(e));
    }
    j["keys"] = json::array();
    for (const auto& [kid, key] : keys_) {
        j["keys"].push_back(json{{"kid", key.kid},
                                 {"key", key.key_hex},
                                 {"algorithm", key.algorithm},
                                 {"valid_from", key.valid_from},
                                 {"valid_to", key.valid_to}});
    }
    j["attestations"] = json::array();
    for (const auto& [uri, a] : attestations_) {
        json e{{"uri", uri},
               {"subject", a.subject},
               {"code_digest", a.code_digest},
               {"build_ref", a.build_ref},
               {"issued_at", a.issued_at},
               {"expires_at", a.expires_at},
               {"attestor_signature", a.attestor_signature_hex}};
        auto cur = current_attestation_.find(a.subject);
        e["current"] = cur != current_attestation_.end() && cur->second == uri;
        j["attestations"].push_back(std::move(e));
    }
    j["attestor"] = json{{"kid", attestor_key_.kid}, {"key", attestor_key_.key_hex}};
    return j;
}

IdentityRegistry IdentityRegistry::import_json(const json& j) {
    IdentityRegistry reg;
    if (j.contains("attestor")) {
        reg.attestor_key_.kid = j["attestor"].at("kid").get<std::string>();
        reg.attestor_key_.key_hex = j["attestor"].at("key").get<std::string>();
    }
    for (const auto& k : j.at("keys")) {
        RegisteredKey key;
        key.kid = k.at("kid").get<std::string>();
        key.key_hex = k.at("key").get<std::string>();
        key.algorithm = k.at("algorithm").get<std::string>();
        key.valid_from = k.at("valid_from").get<SimTime>();
        key.valid_to = k.at("valid_to").get<SimTime>();
        reg.keys_[key.kid] = std::move(key);
    }
    for (const auto& e : j.at("identities")) {
        AgentIdentity id;
        id.spiffe_uri = e.at("spiffe_uri").get<std::string>();
        id.current_kid = e.at("current_kid").get<std::string>();
        id.status = e.at("status").get<std::string>() == "revoked" ? IdentityStatus::revoked
                                                                   : IdentityStatus::active;
        if (e.contains("revoked_at")) id.revoked_at = e.at("revoked_at").get<SimTime>();
        reg.identity_kids_[id.spiffe_uri] = e.at("kids").get<std::vector<std::string>>();
        reg.identities_[id.spiffe_uri] = std::move(id);
    }
    for (const auto& a : j.at("attestations")) {
        Attestation att;
        att.subject = a.at("subject").get<std::string>();
        att.code_digest = a.at("code_digest").get<std::string>();
        att.build_ref = a.at("build_ref").get<std::string>();
        att.issued_at = a.at("issued_at").get<SimTime>();
        att.expires_at = a.at("expires_at").get<SimTime>();
        att.attestor_signature_hex = a.at("attestor_signature").get<std::string>();
        std::string uri = a.at("uri").get<std::string>();
        if (a.value("current", false)) reg.current_attestation_[att.subject] = uri;
        reg.attestations_[uri] = std::move(att);
    }
    return reg;
}

}  // namespace aegis
