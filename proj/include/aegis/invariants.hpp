#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "aegis/contracts.hpp"
#include "aegis/evidence.hpp"

namespace aegis {

// ---------------------------------------------------------------------------
// Machine checks for the three ecosystem invariants over an event log, the
// evidence graph, and the identity registry. The orchestrator gates
// pre-execution; this engine audits post hoc.
// ---------------------------------------------------------------------------

// Node kinds that count as a decision artifact for the traceability check.
const std::set<NodeKind>& decision_artifact_kinds();

// Resolves the asset an action touches via the schema's designated fields:
// the composite key first, then each field value alone. `unknown` is set
// when fields are present but nothing resolves (fail-safe: crown jewel).
const AssetRecord* resolve_target_asset(const SignedEvent& action, const SchemaRegistry& schemas,
                                        const AssetInventory& assets, bool& unknown);

struct InvariantChecker {
    const SchemaRegistry& schemas;
    const IdentityRegistry& identities;
    const EvidenceGraph& graph;
    const AssetInventory& assets;
    std::set<NodeKind> decision_kinds = decision_artifact_kinds();
    // Criticality at or above this makes a non-flagged asset count as
    // high-impact for the HITL check.
    double high_impact_criticality = 1.01;  // disabled unless configured

    // Invariant 1: policies resolve, a decision artifact is reachable, and
    // evidence refs resolve. Throws NotAnAction for non-state-changing
    // schemas.
    Verdict check_traceability(const SignedEvent& action) const;

    // Invariant 2: crown-jewel targets demand a satisfied policy_cosign with
    // every approval strictly before emission. Unknown targets are treated
    // as crown jewels; non-crown-jewel targets pass with a VacuousPass note.
    Verdict check_hitl(const SignedEvent& action) const;

    // Invariant 3: schema validity, signature, provenance at signing time.
    Verdict check_provenance(const SignedEvent& ev) const;

    // Resolves the asset an action touches via the schema's designated
    // fields: composite key first, then each field value. Returns nullptr
    // with `unknown=true` when fields are present but nothing resolves.
    const AssetRecord* resolve_asset(const SignedEvent& action, bool& unknown) const;
};

struct AuditViolation {
    std::string trace_id;
    std::string invariant;  // traceability | hitl | provenance
    Verdict verdict;
};

struct AuditReport {
    std::size_t events_checked = 0;
    std::vector<AuditViolation> violations;  // sorted by (trace_id, invariant)
    std::map<std::string, std::size_t> pass_counts;
    std::map<std::string, std::size_t> fail_counts;
    std::size_t vacuous_hitl = 0;

    bool clean() const { return violations.empty(); }
};

AuditReport audit_log(const std::vector<SignedEvent>& events, const InvariantChecker& checker);

json to_json(const AuditReport& report);
std::string render_text(const AuditReport& report);

}  // namespace aegis
