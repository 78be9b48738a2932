#include "aegis/envelope.hpp"

#include <algorithm>
#include <regex>
#include <set>

namespace aegis {

const char* constraint_kind_name(ConstraintKind k) {
    switch (k) {
        case ConstraintKind::policy_cosign: return "policy_cosign";
        case ConstraintKind::hitl_on_gap_detected: return "hitl_on_gap_detected";
        case ConstraintKind::auto_open_ticket: return "auto_open_ticket";
        case ConstraintKind::no_emergency_admin: return "no_emergency_admin";
        case ConstraintKind::read_only: return "read_only";
        case ConstraintKind::no_direct_containment: return "no_direct_containment";
        case ConstraintKind::timebox: return "timebox_ms";
        case ConstraintKind::custom: return "custom";
    }
    return "custom";
}

Constraint Constraint::cosign(std::vector<std::string> roles) {
    Constraint c;
    c.kind = ConstraintKind::policy_cosign;
    c.required_roles = std::move(roles);
    return c;
}
namespace {

Constraint bare(ConstraintKind kind) {
    Constraint c;
    c.kind = kind;
    return c;
}

}  // namespace

Constraint Constraint::hitl_on_gap() { return bare(ConstraintKind::hitl_on_gap_detected); }
Constraint Constraint::auto_ticket() { return bare(ConstraintKind::auto_open_ticket); }
Constraint Constraint::no_emergency_admin() { return bare(ConstraintKind::no_emergency_admin); }
Constraint Constraint::read_only() { return bare(ConstraintKind::read_only); }
Constraint Constraint::no_direct_containment() { return bare(ConstraintKind::no_direct_containment); }
Constraint Constraint::timebox(SimTime limit_ms) {
    Constraint c;
    c.kind = ConstraintKind::timebox;
    c.timebox_ms = limit_ms;
    return c;
}
Constraint Constraint::custom(std::string name, std::map<std::string, std::string> params) {
    Constraint c;
    c.kind = ConstraintKind::custom;
    c.name = std::move(name);
    c.params = std::move(params);
    return c;
}

const char* classification_name(Classification c) {
    switch (c) {
        case Classification::internal: return "internal";
        case Classification::internal_plus_sensitive: return "internal-plus-sensitive";
        case Classification::confidential: return "confidential";
        case Classification::regulated_data_present: return "regulated-data-present";
    }
    return "internal";
}

Classification classification_from(const std::string& s) {
    if (s == "internal") return Classification::internal;
    if (s == "internal-plus-sensitive") return Classification::internal_plus_sensitive;
    if (s == "confidential") return Classification::confidential;
    if (s == "regulated-data-present") return Classification::regulated_data_present;
    fail(Errc::parse_error, "unknown classification '" + s + "'");
}

std::string approval_signing_bytes(const std::string& task_id, const Approval& a) {
    std::string out = "approval";
    out.push_back('\x1f');
    out += task_id;
    out.push_back('\x1f');
    out += a.role;
    out.push_back('\x1f');
    out += a.approver_id;
    out.push_back('\x1f');
    out += std::to_string(a.approved_at);
    return out;
}

bool Envelope::has_constraint(ConstraintKind k) const { return find_constraint(k) != nullptr; }

const Constraint* Envelope::find_constraint(ConstraintKind k) const {
    for (const auto& c : constraints)
        if (c.kind == k) return &c;
    return nullptr;
}

std::vector<const Constraint*> Envelope::find_all(ConstraintKind k) const {
    std::vector<const Constraint*> out;
    for (const auto& c : constraints)
        if (c.kind == k) out.push_back(&c);
    return out;
}

namespace {

void require_nonempty(const std::string& value, const char* what) {
    if (value.empty()) fail(Errc::empty_identifier, std::string(what) + " must be nonempty");
}

}  // namespace

Envelope new_envelope(const std::string& mission_id, const std::string& thread_id,
                      const std::string& role, const std::string& intent,
                      std::vector<PolicyRef> policy_refs, std::vector<Constraint> constraints,
                      Classification classification, bool legal_hold, Provenance provenance,
                      IdSource& ids) {
    require_nonempty(mission_id, "mission_id");
    require_nonempty(thread_id, "thread_id");
    require_nonempty(role, "role");
    require_nonempty(intent, "intent");
    for (const auto& p : policy_refs) require_nonempty(p.policy_id, "policy_refs entry");

    Envelope env;
    env.mission_id = mission_id;
    env.thread_id = thread_id;
    env.task_id = ids.fresh("task");
    env.role = role;
    env.intent = intent;
    env.policy_refs = std::move(policy_refs);
    env.constraints = std::move(constraints);
    env.classification = classification;
    env.legal_hold = legal_hold;
    env.provenance = std::move(provenance);
    return env;
}

Envelope child_envelope(const Envelope& parent, const std::string& role,
                        const std::string& intent, IdSource& ids) {
    require_nonempty(role, "role");
    require_nonempty(intent, "intent");
    Envelope env = parent;
    env.task_id = ids.fresh("task");
    env.role = role;
    env.intent = intent;
    env.approvals.clear();
    env.decision_basis = DecisionBasis{};
    return env;
}

Envelope record_cosign(const Envelope& env, const Approval& approval,
                       const ApprovalVerifier& verify) {
    if (!env.has_constraint(ConstraintKind::policy_cosign))
        fail(Errc::no_cosign_constraint, "envelope " + env.task_id + " has no policy_cosign constraint");
    for (const auto& a : env.approvals) {
        if (a.role == approval.role && a.approver_id == approval.approver_id)
            fail(Errc::duplicate_approval,
                 "approval by " + approval.approver_id + " for role " + approval.role +
                     " already recorded");
    }
    if (!verify(approval, env.task_id))
        fail(Errc::bad_approval_signature,
             "approval signature by " + approval.approver_id + " does not verify");
    Envelope out = env;
    out.approvals.push_back(approval);
    return out;
}

namespace {

bool roles_covered(const Envelope& env, const std::vector<const Approval*>& valid) {
    for (const auto* c : env.find_all(ConstraintKind::policy_cosign)) {
        for (const auto& role : c->required_roles) {
            bool covered = false;
            for (const auto* a : valid) {
                if (a->role == role) {
                    covered = true;
                    break;
                }
            }
            if (!covered) return false;
        }
    }
    return true;
}

}  // namespace

bool cosign_satisfied(const Envelope& env) {
    std::vector<const Approval*> all;
    all.reserve(env.approvals.size());
    for (const auto& a : env.approvals) all.push_back(&a);
    return roles_covered(env, all);
}

bool cosign_satisfied(const Envelope& env, const ApprovalVerifier& verify) {
    std::vector<const Approval*> valid;
    for (const auto& a : env.approvals)
        if (verify(a, env.task_id)) valid.push_back(&a);
    return roles_covered(env, valid);
}

ValidationReport validate_envelope(const Envelope& env) {
    ValidationReport report;
    auto check_id = [&](const std::string& v, const char* path) {
        if (v.empty()) report.add(path, "empty_identifier", std::string(path) + " is empty");
    };
    check_id(env.mission_id, "mission_id");
    check_id(env.thread_id, "thread_id");
    check_id(env.task_id, "task_id");
    check_id(env.role, "role");
    check_id(env.intent, "intent");

    for (std::size_t i = 0; i < env.policy_refs.size(); ++i) {
        if (env.policy_refs[i].policy_id.empty())
            report.add("policy_refs[" + std::to_string(i) + "]", "empty_identifier",
                       "policy_id is empty");
    }

    if (env.decision_basis.confidence < 0.0 || env.decision_basis.confidence > 1.0)
        report.add("decision_basis.confidence", "confidence_out_of_range",
                   "confidence out of range [0,1]");

    static const std::regex uri_shape("^[A-Za-z][A-Za-z0-9+.-]*://.+");
    for (std::size_t i = 0; i < env.decision_basis.evidence_refs.size(); ++i) {
        const auto& ref = env.decision_basis.evidence_refs[i];
        if (ref.empty() || !std::regex_match(ref, uri_shape))
            report.add("decision_basis.evidence_refs[" + std::to_string(i) + "]",
                       "bad_evidence_ref", "evidence ref is not a URI-shaped string");
    }

    check_id(env.provenance.producer_spiffe, "provenance.producer_spiffe");
    check_id(env.provenance.signing_kid, "provenance.signing_kid");
    check_id(env.provenance.attestation_ref, "provenance.attestation_ref");

    for (std::size_t i = 0; i < env.constraints.size(); ++i) {
        const auto& c = env.constraints[i];
        std::string path = "constraints[" + std::to_string(i) + "]";
        if (c.kind == ConstraintKind::policy_cosign && c.required_roles.empty())
            report.add(path, "empty_cosign_roles", "policy_cosign requires at least one role");
        if (c.kind == ConstraintKind::timebox && c.timebox_ms <= 0)
            report.add(path, "bad_timebox", "timebox limit must be > 0");
        if (c.kind == ConstraintKind::custom && c.name.empty())
            report.add(path, "empty_identifier", "custom constraint has no name");
        for (std::size_t k = 0; k < i; ++k) {
            if (env.constraints[k] == c) {
                report.add(path, "duplicate_constraint",
                           "identical constraint already present at index " + std::to_string(k));
                break;
            }
        }
    }
    return report;
}

// --- serialization ---------------------------------------------------------

json to_json(const Constraint& c) {
    switch (c.kind) {
        case ConstraintKind::policy_cosign:
            return json{{"policy_cosign", c.required_roles}};
        case ConstraintKind::timebox:
            return json{{"timebox_ms", c.timebox_ms}};
        case ConstraintKind::custom:
            if (c.params.empty()) return json(c.name);
            return json{{c.name, c.params}};
        default:
            return json(constraint_kind_name(c.kind));
    }
}

Constraint constraint_from_json(const json& j) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "hitl_on_gap_detected") return Constraint::hitl_on_gap();
        if (s == "auto_open_ticket") return Constraint::auto_ticket();
        if (s == "no_emergency_admin") return Constraint::no_emergency_admin();
        if (s == "read_only") return Constraint::read_only();
        if (s == "no_direct_containment") return Constraint::no_direct_containment();
        // Unknown names parse into custom; the vocabulary is open.
        return Constraint::custom(s);
    }
    if (j.is_object() && j.size() == 1) {
        const auto& key = j.begin().key();
        const auto& value = j.begin().value();
        if (key == "policy_cosign") return Constraint::cosign(value.get<std::vector<std::string>>());
        if (key == "timebox_ms") return Constraint::timebox(value.get<SimTime>());
        std::map<std::string, std::string> params;
        if (value.is_object())
            for (auto it = value.begin(); it != value.end(); ++it)
                params[it.key()] = it.value().is_string() ? it.value().get<std::string>()
                                                          : it.value().dump();
        return Constraint::custom(key, std::move(params));
    }
    fail(Errc::parse_error, "constraint must be a string or single-key object");
}

namespace {

json policy_ref_to_json(const PolicyRef& p) {
    if (p.version.empty()) return json(p.policy_id);
    return json(p.policy_id + "@" + p.version);
}

PolicyRef policy_ref_from_json(const json& j) {
    std::string s = j.get<std::string>();
    auto at = s.rfind('@');
    if (at == std::string::npos || at == 0) return PolicyRef{s, ""};
    return PolicyRef{s.substr(0, at), s.substr(at + 1)};
}

}  // namespace

json to_json(const Envelope& env) {
    json j;
    j["mission_id"] = env.mission_id;
    j["thread_id"] = env.thread_id;
    j["task_id"] = env.task_id;
    j["role"] = env.role;
    j["intent"] = env.intent;
    j["policy_refs"] = json::array();
    for (const auto& p : env.policy_refs) j["policy_refs"].push_back(policy_ref_to_json(p));
    j["constraints"] = json::array();
    for (const auto& c : env.constraints) j["constraints"].push_back(to_json(c));
    json basis;
    basis["evidence_refs"] = env.decision_basis.evidence_refs;
    basis["confidence"] = env.decision_basis.confidence;
    if (!env.decision_basis.explanation_ref.empty())
        basis["explanation_ref"] = env.decision_basis.explanation_ref;
    j["decision_basis"] = std::move(basis);
    j["provenance"] = json{{"producer_spiffe", env.provenance.producer_spiffe},
                           {"signing_kid", env.provenance.signing_kid},
                           {"attestation_ref", env.provenance.attestation_ref}};
    j["classification"] = classification_name(env.classification);
    j["legal_hold"] = env.legal_hold;
    j["approvals"] = json::array();
    for (const auto& a : env.approvals)
        j["approvals"].push_back(json{{"role", a.role},
                                      {"approver_id", a.approver_id},
                                      {"approved_at", a.approved_at},
                                      {"signature", a.signature_hex}});
    return j;
}

Envelope envelope_from_json(const json& j) {
    Envelope env;
    env.mission_id = j.at("mission_id").get<std::string>();
    env.thread_id = j.at("thread_id").get<std::string>();
    env.task_id = j.at("task_id").get<std::string>();
    env.role = j.at("role").get<std::string>();
    env.intent = j.at("intent").get<std::string>();
    for (const auto& p : j.at("policy_refs")) env.policy_refs.push_back(policy_ref_from_json(p));
    for (const auto& c : j.at("constraints")) env.constraints.push_back(constraint_from_json(c));
    const auto& basis = j.at("decision_basis");
    env.decision_basis.evidence_refs = basis.at("evidence_refs").get<std::vector<std::string>>();
    env.decision_basis.confidence = basis.at("confidence").get<double>();
    if (basis.contains("explanation_ref"))
        env.decision_basis.explanation_ref = basis.at("explanation_ref").get<std::string>();
    const auto& prov = j.at("provenance");
    env.provenance.producer_spiffe = prov.at("producer_spiffe").get<std::string>();
    env.provenance.signing_kid = prov.at("signing_kid").get<std::string>();
    env.provenance.attestation_ref = prov.at("attestation_ref").get<std::string>();
    env.classification = classification_from(j.at("classification").get<std::string>());
    env.legal_hold = j.at("legal_hold").get<bool>();
    if (j.contains("approvals")) {
        for (const auto& a : j.at("approvals")) {
            Approval ap;
            ap.role = a.at("role").get<std::string>();
            ap.approver_id = a.at("approver_id").get<std::string>();
            ap.approved_at = a.at("approved_at").get<SimTime>();
            ap.signature_hex = a.at("signature").get<std::string>();
            env.approvals.push_back(std::move(ap));
        }
    }
    return env;
}

}  // namespace aegis
