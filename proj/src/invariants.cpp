#include "aegis/invariants.hpp"

#include <algorithm>
#include <sstream>

namespace aegis {

const std::set<NodeKind>& decision_artifact_kinds() {
    static const std::set<NodeKind> kinds = {NodeKind::risk_assessment, NodeKind::behavioral_risk,
                                             NodeKind::hunt_finding, NodeKind::compliance_gap};
    return kinds;
}

Verdict InvariantChecker::check_traceability(const SignedEvent& action) const {
    const auto* def = schemas.find(action.oc_type, action.schema_version);
    if (!def || !def->state_changing)
        fail(Errc::not_an_action, action.oc_type + " is not a state-changing contract");

    Verdict v;
    if (action.envelope.policy_refs.empty()) {
        v.fail("MissingPolicyRefs", action.trace_id, "envelope carries no policy_refs");
    } else {
        for (const auto& ref : action.envelope.policy_refs) {
            const auto* node = graph.find_node(policy_node_uri(ref.policy_id));
            if (!node || node->kind != NodeKind::policy_bundle)
                v.fail("UnresolvedPolicyRef", ref.policy_id,
                       "policy_ref does not resolve to a PolicyBundle node");
        }
    }

    std::string action_node = event_node_uri(action.trace_id);
    if (!graph.has_node(action_node)) {
        v.fail("NoDecisionArtifact", action.trace_id, "action has no evidence-graph node");
    } else {
        auto trace = graph.trace_action(action_node, action.envelope.policy_refs);
        bool found = false;
        for (const auto& id : trace.evidence) {
            const auto* n = graph.find_node(id);
            if (n && decision_kinds.count(n->kind)) {
                found = true;
                break;
            }
        }
        if (!found)
            v.fail("NoDecisionArtifact", action.trace_id,
                   "no RiskAssessment-class artifact reachable from the action");
    }

    const auto& refs = action.envelope.decision_basis.evidence_refs;
    if (refs.empty()) {
        v.fail("MissingEvidenceRefs", action.trace_id, "decision_basis.evidence_refs empty");
    } else {
        for (const auto& ref : refs) {
            if (!graph.has_node(ref))
                v.fail("UnresolvedEvidenceRef", ref, "evidence ref does not resolve to a node");
        }
    }
    return v;
}

const AssetRecord* resolve_target_asset(const SignedEvent& action, const SchemaRegistry& schemas,
                                        const AssetInventory& assets, bool& unknown) {
    unknown = false;
    const auto* def = schemas.find(action.oc_type, action.schema_version);
    if (!def || def->target_asset_fields.empty()) return nullptr;

    std::vector<std::string> values;
    for (const auto& field : def->target_asset_fields) {
        auto it = action.payload.find(field);
        if (it == action.payload.end() || !it->is_string()) continue;
        values.push_back(it->get<std::string>());
    }
    if (values.empty()) return nullptr;  // no target named: vacuous

    std::vector<std::string> candidates;
    if (values.size() > 1) {
        std::string composite = values[0];
        for (std::size_t i = 1; i < values.size(); ++i) composite += ":" + values[i];
        candidates.push_back(composite);
    }
    for (const auto& value : values) candidates.push_back(value);
    for (const auto& key : candidates) {
        if (const auto* a = assets.find(key)) return a;
    }
    unknown = true;
    return nullptr;
}

const AssetRecord* InvariantChecker::resolve_asset(const SignedEvent& action,
                                                   bool& unknown) const {
    return resolve_target_asset(action, schemas, assets, unknown);
}

Verdict InvariantChecker::check_hitl(const SignedEvent& action) const {
    const auto* def = schemas.find(action.oc_type, action.schema_version);
    if (!def || !def->state_changing)
        fail(Errc::not_an_action, action.oc_type + " is not a state-changing contract");

    Verdict v;
    bool unknown = false;
    const auto* asset = resolve_asset(action, unknown);
    bool gated;
    if (unknown) {
        // Fail-safe: a named target missing from the inventory gates like a
        // crown jewel.
        v.note("UnknownAsset", action.trace_id, "target asset absent from inventory");
        gated = true;
    } else if (asset == nullptr) {
        gated = false;
    } else {
        gated = asset->crown_jewel || asset->criticality >= high_impact_criticality;
    }

    if (!gated) {
        v.note("VacuousPass", action.trace_id, "target is not a crown-jewel asset");
        return v;
    }

    if (!action.envelope.has_constraint(ConstraintKind::policy_cosign)) {
        v.fail("MissingCosignConstraint", action.trace_id,
               "crown-jewel action lacks a policy_cosign constraint");
        return v;
    }
    if (!cosign_satisfied(action.envelope, identities.approval_verifier())) {
        v.fail("CosignUnsatisfied", action.trace_id,
               "required cosign roles are not all covered by valid approvals");
    }
    for (const auto& a : action.envelope.approvals) {
        if (a.approved_at >= action.emitted_at)
            v.fail("ApprovalAfterExecution", a.approver_id,
                   "approval not strictly before emission");
    }
    return v;
}

Verdict InvariantChecker::check_provenance(const SignedEvent& ev) const {
    return verify_event(ev, schemas, identities);
}

AuditReport audit_log(const std::vector<SignedEvent>& events, const InvariantChecker& checker) {
    AuditReport report;
    report.pass_counts = {{"traceability", 0}, {"hitl", 0}, {"provenance", 0}};
    report.fail_counts = report.pass_counts;
    for (const auto& ev : events) {
        ++report.events_checked;
        auto record = [&](const std::string& invariant, Verdict verdict) {
            if (verdict.passed) {
                ++report.pass_counts[invariant];
            } else {
                ++report.fail_counts[invariant];
                report.violations.push_back({ev.trace_id, invariant, std::move(verdict)});
            }
        };
        record("provenance", checker.check_provenance(ev));
        const auto* def = checker.schemas.find(ev.oc_type, ev.schema_version);
        if (def && def->state_changing) {
            record("traceability", checker.check_traceability(ev));
            Verdict hitl = checker.check_hitl(ev);
            if (hitl.has_note("VacuousPass")) ++report.vacuous_hitl;
            record("hitl", std::move(hitl));
        }
    }
    std::stable_sort(report.violations.begin(), report.violations.end(),
                     [](const AuditViolation& a, const AuditViolation& b) {
                         if (a.trace_id != b.trace_id) return a.trace_id < b.trace_id;
                         return a.invariant < b.invariant;
                     });
    return report;
}

json to_json(const AuditReport& report) {
    json j;
    j["events_checked"] = report.events_checked;
    j["violations"] = json::array();
    for (const auto& v : report.violations) {
        json e{{"trace_id", v.trace_id},
               {"invariant", v.invariant},
               {"reason_codes", v.verdict.reason_codes}};
        json details = json::array();
        for (const auto& [subject, message] : v.verdict.details)
            details.push_back(json{{"subject", subject}, {"message", message}});
        e["details"] = std::move(details);
        j["violations"].push_back(std::move(e));
    }
    j["summary"] = json{{"pass", report.pass_counts},
                        {"fail", report.fail_counts},
                        {"vacuous_hitl", report.vacuous_hitl}};
    return j;
}

std::string render_text(const AuditReport& report) {
    std::ostringstream out;
    out << "audit: " << report.events_checked << " events checked, " << report.violations.size()
        << " violation(s)\n";
    for (const auto& [inv, n] : report.pass_counts) {
        out << "  " << inv << ": " << n << " pass, " << report.fail_counts.at(inv) << " fail\n";
    }
    out << "  hitl vacuous passes: " << report.vacuous_hitl << "\n";
    for (const auto& v : report.violations) {
        out << "  VIOLATION " << v.invariant << " " << v.trace_id << ":";
        for (const auto& r : v.verdict.reason_codes) out << " " << r;
        out << "\n";
    }
    return out.str();
}

}  // namespace aegis
