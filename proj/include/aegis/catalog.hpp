#pragma once

#include <string>
#include <vector>

#include "aegis/contracts.hpp"

namespace aegis {

// Registers the shipped output-contract catalog: SCIMMutation,
// AccessChangeEvent, SoDViolation, HrisEvent, AlertCluster, IncidentCase,
// IncidentTimeline, IncidentSummary, RiskAssessment, MetricsRecord,
// PolicyBundle, EvidenceManifest, the playbook actions (RevokeTokens,
// ForcePasswordReset, OpenTicket), RawAlert, and the infrastructure record
// schemas (DeliveryRecord, DispositionRecord).
void register_builtin_schemas(SchemaRegistry& registry);

struct CatalogAgent {
    std::string code;   // e.g. "C1"
    std::string name;   // e.g. "Identity Lifecycle Agent"
    char domain;        // 'A'..'L'
    bool executable;    // has behavior in this kernel
};

// Full master agent index (domains A-L); only C1, D2, G1, G4, L3, A2, A7
// carry executable behavior.
const std::vector<CatalogAgent>& agent_catalog();

json agent_catalog_json();

}  // namespace aegis
