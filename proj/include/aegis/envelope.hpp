#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aegis/common.hpp"
#include "aegis/rng.hpp"

namespace aegis {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Context envelope: the governance record carried with every agent
// invocation and attached to every output. Envelopes are immutable values;
// every mutator returns a new envelope so each stage's snapshot stays
// reconstructable.
// ---------------------------------------------------------------------------

struct PolicyRef {
    std::string policy_id;
    std::string version;  // empty = unversioned

    bool operator==(const PolicyRef&) const = default;
};

enum class ConstraintKind {
    policy_cosign,
    hitl_on_gap_detected,
    auto_open_ticket,
    no_emergency_admin,
    read_only,
    no_direct_containment,
    timebox,
    custom,
};

const char* constraint_kind_name(ConstraintKind k);

struct Constraint {
    ConstraintKind kind = ConstraintKind::custom;
    std::vector<std::string> required_roles;       // policy_cosign
    SimTime timebox_ms = 0;                        // timebox
    std::string name;                              // custom
    std::map<std::string, std::string> params;     // custom

    bool operator==(const Constraint&) const = default;

    static Constraint cosign(std::vector<std::string> roles);
    static Constraint hitl_on_gap();
    static Constraint auto_ticket();
    static Constraint no_emergency_admin();
    static Constraint read_only();
    static Constraint no_direct_containment();
    static Constraint timebox(SimTime limit_ms);
    static Constraint custom(std::string name, std::map<std::string, std::string> params = {});
};

struct DecisionBasis {
    std::vector<std::string> evidence_refs;
    double confidence = 0.0;
    std::string explanation_ref;  // empty = none

    bool operator==(const DecisionBasis&) const = default;
};

struct Provenance {
    std::string producer_spiffe;
    std::string signing_kid;
    std::string attestation_ref;

    bool operator==(const Provenance&) const = default;
};

enum class Classification {
    internal,
    internal_plus_sensitive,
    confidential,
    regulated_data_present,
};

const char* classification_name(Classification c);
Classification classification_from(const std::string& s);

struct Approval {
    std::string role;
    std::string approver_id;
    SimTime approved_at = 0;
    std::string signature_hex;

    bool operator==(const Approval&) const = default;
};

// Canonical bytes an approver signs: binds the approval to one task.
std::string approval_signing_bytes(const std::string& task_id, const Approval& a);

struct Envelope {
    std::string mission_id;
    std::string thread_id;
    std::string task_id;
    std::string role;
    std::string intent;
    std::vector<PolicyRef> policy_refs;
    std::vector<Constraint> constraints;
    DecisionBasis decision_basis;
    Provenance provenance;
    Classification classification = Classification::internal;
    bool legal_hold = false;
    std::vector<Approval> approvals;

    bool operator==(const Envelope&) const = default;

    bool has_constraint(ConstraintKind k) const;
    const Constraint* find_constraint(ConstraintKind k) const;
    std::vector<const Constraint*> find_all(ConstraintKind k) const;
};

struct Finding {
    std::string path;
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool ok() const { return findings.empty(); }
    void add(std::string path, std::string code, std::string message) {
        findings.push_back({std::move(path), std::move(code), std::move(message)});
    }
};

// Verifies an approval signature against the approver's registered key.
using ApprovalVerifier =
    std::function<bool(const Approval& approval, const std::string& task_id)>;

Envelope new_envelope(const std::string& mission_id, const std::string& thread_id,
                      const std::string& role, const std::string& intent,
                      std::vector<PolicyRef> policy_refs, std::vector<Constraint> constraints,
                      Classification classification, bool legal_hold, Provenance provenance,
                      IdSource& ids);

// Same mission/thread/policies/constraints/classification/legal_hold, fresh
// task_id, approvals and decision basis reset.
Envelope child_envelope(const Envelope& parent, const std::string& role,
                        const std::string& intent, IdSource& ids);

// Appends a verified approval. Throws NoCosignConstraint,
// BadApprovalSignature, DuplicateApproval.
Envelope record_cosign(const Envelope& env, const Approval& approval,
                       const ApprovalVerifier& verify);

// True iff every role required by every policy_cosign constraint is covered
// by the recorded approvals; vacuously true with no cosign constraint.
bool cosign_satisfied(const Envelope& env);

// As above but re-validates each approval signature; used when the envelope
// was parsed from a log rather than built through record_cosign.
bool cosign_satisfied(const Envelope& env, const ApprovalVerifier& verify);

ValidationReport validate_envelope(const Envelope& env);

json to_json(const Constraint& c);
Constraint constraint_from_json(const json& j);
json to_json(const Envelope& env);
Envelope envelope_from_json(const json& j);

}  // namespace aegis
