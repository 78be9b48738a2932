#include "aegis/catalog.hpp"

namespace aegis {

namespace {

FieldSpec str(std::string name, bool required = true) {
    FieldSpec f;
    f.name = std::move(name);
    f.kind = FieldKind::string_field;
    f.required = required;
    return f;
}

FieldSpec en(std::string name, std::vector<std::string> values, bool required = true) {
    FieldSpec f;
    f.name = std::move(name);
    f.kind = FieldKind::enum_field;
    f.enum_values = std::move(values);
    f.required = required;
    return f;
}

FieldSpec ts(std::string name, bool required = true) {
    FieldSpec f;
    f.name = std::move(name);
    f.kind = FieldKind::timestamp_field;
    f.required = required;
    return f;
}

FieldSpec real01(std::string name, bool required = true) {
    FieldSpec f;
    f.name = std::move(name);
    f.kind = FieldKind::real_field;
    f.required = required;
    f.min_value = 0.0;
    f.max_value = 1.0;
    return f;
}

FieldSpec realv(std::string name, bool required = true) {
    FieldSpec f;
    f.name = std::move(name);
    f.kind = FieldKind::real_field;
    f.required = required;
    return f;
}

FieldSpec integer(std::string name, bool required = true) {
    FieldSpec f;
    f.name = std::move(name);
    f.kind = FieldKind::integer_field;
    f.required = required;
    return f;
}

FieldSpec obj(std::string name, bool required = true) {
    FieldSpec f;
    f.name = std::move(name);
    f.kind = FieldKind::object_field;
    f.required = required;
    return f;
}

FieldSpec strlist(std::string name, bool required = true) {
    FieldSpec f;
    f.name = std::move(name);
    f.kind = FieldKind::list_field;
    f.element = FieldKind::string_field;
    f.required = required;
    return f;
}

FieldSpec objlist(std::string name, bool required = true) {
    FieldSpec f;
    f.name = std::move(name);
    f.kind = FieldKind::list_field;
    f.element = FieldKind::object_field;
    f.required = required;
    return f;
}

FieldSpec boolean(std::string name, bool required = true) {
    FieldSpec f;
    f.name = std::move(name);
    f.kind = FieldKind::boolean_field;
    f.required = required;
    return f;
}

}  // namespace

void register_builtin_schemas(SchemaRegistry& registry) {
    {
        SchemaDef d;
        d.oc_type = "HrisEvent";
        d.fields = {en("event_type",
                       {"hire", "transfer", "terminate", "extended_leave", "return_from_leave"}),
                    str("employee_id"), str("name"), str("department"), str("job_title"),
                    str("location"), str("manager_id", false),
                    en("employment_type", {"employee", "contractor"}), str("start_date", false),
                    str("end_date", false), ts("effective_ts")};
        d.idempotency_recipe = {"employee_id", "event_type", "effective_ts"};
        d.ordering_key_field = "employee_id";
        d.retention = RetentionClass::audit_long;
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "SCIMMutation";
        d.fields = {str("mutation_id"), str("target_system"),
                    en("operation_type", {"create", "update", "deprovision"}),
                    en("target_resource", {"user", "group"}), str("target_id", false),
                    str("employee_id"), obj("scim_payload"),
                    en("reason", {"joiner", "mover", "leaver", "remediation"}),
                    ts("requested_at"), ts("effective_ts")};
        d.ordering_key_field = "employee_id";
        d.idempotency_recipe = {"target_system", "operation_type", "employee_id"};
        d.floor_seconds = 60;
        d.state_changing = true;
        d.retention = RetentionClass::audit_long;
        d.target_asset_fields = {"target_system", "employee_id"};
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "AccessChangeEvent";
        d.fields = {str("employee_id"), str("target_system"),
                    en("change_kind", {"account_created", "account_disabled", "account_enabled",
                                       "entitlement_added", "entitlement_removed"}),
                    str("detail"), ts("occurred_at")};
        d.ordering_key_field = "employee_id";
        d.idempotency_recipe = {"employee_id", "target_system", "change_kind", "detail"};
        d.retention = RetentionClass::audit_long;
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "SoDViolation";
        d.fields = {str("employee_id"), str("rule_id"), str("member_a"), str("member_b"),
                    en("severity", {"low", "medium", "high", "critical"}),
                    strlist("required_approvers"),
                    en("resolution", {"pending", "approved_exception", "blocked"})};
        d.idempotency_recipe = {"employee_id", "rule_id", "resolution"};
        d.retention = RetentionClass::audit_long;
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "RawAlert";
        d.fields = {str("alert_id"), en("source", {"siem", "edr", "idp"}),
                    en("alert_type",
                       {"login_failure", "geo_anomaly", "token_misuse", "malware", "other"}),
                    str("identity_id"), str("asset_id"), real01("severity"), real01("confidence"),
                    ts("observed_at")};
        d.idempotency_recipe = {"alert_id"};
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "AlertCluster";
        d.fields = {str("cluster_id"), strlist("alert_ids"), str("identity_id"),
                    ts("window_start"), ts("window_end"), realv("risk_score"), obj("features")};
        d.idempotency_recipe = {"cluster_id"};
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "IncidentCase";
        d.fields = {str("incident_id"), str("cluster_ref"), str("identity_id"),
                    en("severity_band", {"low", "medium", "high"}),
                    en("status", {"open", "contained", "closed"}), boolean("crown_jewel_involved"),
                    ts("opened_at")};
        d.idempotency_recipe = {"incident_id"};
        d.retention = RetentionClass::audit_long;
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "IncidentTimeline";
        d.fields = {str("incident_ref"), objlist("entries")};
        d.idempotency_recipe = {"incident_ref"};
        d.retention = RetentionClass::audit_long;
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "IncidentSummary";
        d.fields = {str("incident_ref"), en("severity_band", {"low", "medium", "high"}),
                    boolean("crown_jewel_involved"), str("asset_id"), integer("action_count"),
                    en("outcome", {"auto_contained", "approved_contained", "ticket_only"}),
                    ts("cluster_emitted_at"), ts("opened_at"), ts("closed_at")};
        d.idempotency_recipe = {"incident_ref"};
        d.retention = RetentionClass::audit_long;
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "RiskAssessment";
        d.fields = {str("assessment_id"),
                    en("subject_kind", {"provisioning_task", "incident", "agent_lifecycle"}),
                    str("subject_ref"), realv("risk_score"), str("rationale"), ts("assessed_at")};
        d.idempotency_recipe = {"assessment_id"};
        d.retention = RetentionClass::audit_long;
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "MetricsRecord";
        d.fields = {str("record_id"), ts("window_start"), ts("window_end"), obj("counts"),
                    objlist("repeat_assets"), realv("mean_cluster_to_incident_ms")};
        d.idempotency_recipe = {"record_id"};
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "PolicyBundle";
        d.fields = {str("policy_id"), str("version"), str("title"), strlist("controls")};
        d.idempotency_recipe = {"policy_id", "version"};
        d.retention = RetentionClass::audit_long;
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "EvidenceManifest";
        d.fields = {str("manifest_id"), strlist("item_refs"), str("produced_by")};
        d.idempotency_recipe = {"manifest_id"};
        d.retention = RetentionClass::audit_long;
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "RevokeTokens";
        d.fields = {str("action_id"), str("identity_id"), str("asset_id"), str("incident_ref"),
                    str("reason")};
        d.ordering_key_field = "identity_id";
        d.idempotency_recipe = {"identity_id", "asset_id", "incident_ref"};
        d.state_changing = true;
        d.target_asset_fields = {"asset_id"};
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "ForcePasswordReset";
        d.fields = {str("action_id"), str("identity_id"), str("asset_id"), str("incident_ref"),
                    str("reason")};
        d.ordering_key_field = "identity_id";
        d.idempotency_recipe = {"identity_id", "asset_id", "incident_ref"};
        d.state_changing = true;
        d.target_asset_fields = {"asset_id"};
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "OpenTicket";
        d.fields = {str("ticket_id"), str("subject_kind"), str("subject_ref"), str("summary"),
                    en("severity", {"low", "medium", "high"})};
        d.idempotency_recipe = {"subject_kind", "subject_ref"};
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "DeliveryRecord";
        d.fields = {str("record_id"),
                    en("record_kind",
                       {"routed", "dead_letter", "submitted", "pending_approval", "queued",
                        "attempt", "endpoint_applied", "endpoint_duplicate", "acked", "nacked",
                        "failed_permanent", "released", "approval_timeout"}),
                    str("subject_key"), str("subject_oc_type", false), str("target_system", false),
                    integer("attempt", false), integer("status_code", false), str("detail", false),
                    ts("at")};
        d.idempotency_recipe = {"record_id"};
        registry.register_schema(std::move(d));
    }
    {
        SchemaDef d;
        d.oc_type = "DispositionRecord";
        d.fields = {str("record_id"),
                    en("record_kind",
                       {"scenario_marker", "routed", "agent_ack", "proposal_disposition",
                        "sod_adjudication", "rollback_outcome", "sla_breach", "task_transition",
                        "dispute", "contest_disposition", "lifecycle_decision"}),
                    str("agent_code", false), str("subject_ref", false), str("employee_id", false),
                    str("from_state", false), str("to_state", false), integer("latency_ms", false),
                    str("verdict", false), str("detail", false), ts("at")};
        d.idempotency_recipe = {"record_id"};
        registry.register_schema(std::move(d));
    }
}

const std::vector<CatalogAgent>& agent_catalog() {
    static const std::vector<CatalogAgent> catalog = {
        {"A1", "Governance Policy Agent", 'A', false},
        {"A2", "Risk Analysis Agent", 'A', true},
        {"A3", "Compliance Auditor Agent", 'A', false},
        {"A4", "Policy Authoring Agent", 'A', false},
        {"A5", "Evidence Collector Agent", 'A', false},
        {"A6", "Control Monitor Agent", 'A', false},
        {"A7", "Metrics Aggregator Agent", 'A', true},
        {"A8", "Supplier Risk Agent", 'A', false},
        {"B1", "Asset Discovery Agent", 'B', false},
        {"B2", "Baseline Compliance Agent", 'B', false},
        {"B3", "Config Monitor Agent", 'B', false},
        {"B4", "Change Governance Agent", 'B', false},
        {"B5", "Patch Orchestration Agent", 'B', false},
        {"B6", "Vulnerability Scanning Agent", 'B', false},
        {"B7", "Risk Prioritization Agent", 'B', false},
        {"C1", "Identity Lifecycle Agent", 'C', true},
        {"C2", "Credential Issuance Agent", 'C', false},
        {"C3", "Access Review Agent", 'C', false},
        {"C4", "Privileged Access Agent", 'C', false},
        {"C5", "Federation Trust Agent", 'C', false},
        {"C6", "Policy Enforcement Agent", 'C', false},
        {"C7", "Session Monitoring Agent", 'C', false},
        {"D1", "Threat Intel Aggregator Agent", 'D', false},
        {"D2", "SIEM Analyst Agent", 'D', true},
        {"D3", "UEBA Analysis Agent", 'D', false},
        {"D4", "Autonomous Hunter Agent", 'D', false},
        {"D5", "Exposure Mapping Agent (ASM)", 'D', false},
        {"D6", "Honeypot Controller Agent", 'D', false},
        {"E1", "Endpoint Protection Agent", 'E', false},
        {"E2", "Network Defense Agent", 'E', false},
        {"E3", "Data Protection Agent", 'E', false},
        {"E4", "Application Security Agent", 'E', false},
        {"E5", "Encryption Management Agent", 'E', false},
        {"E6", "DLP Enforcement Agent", 'E', false},
        {"E7", "Secure Configuration Agent", 'E', false},
        {"F1", "Data Classification Agent", 'F', false},
        {"F2", "Data Access Governance Agent", 'F', false},
        {"F3", "Privacy Compliance Agent", 'F', false},
        {"F4", "Data Retention Agent", 'F', false},
        {"F5", "Data Masking Agent", 'F', false},
        {"F6", "Cross-Border Transfer Agent", 'F', false},
        {"F7", "Consent Management Agent", 'F', false},
        {"G1", "Incident Triage Agent", 'G', true},
        {"G2", "Automated Containment Agent", 'G', false},
        {"G3", "Recovery Orchestration Agent", 'G', false},
        {"G4", "Forensic Analysis Agent", 'G', true},
        {"G5", "RCA Analysis Agent", 'G', false},
        {"G6", "Communications Agent", 'G', false},
        {"H1", "Business Continuity Planner Agent", 'H', false},
        {"H2", "Disaster Recovery Orchestrator Agent", 'H', false},
        {"H3", "Backup Validation Agent", 'H', false},
        {"H4", "Crisis Simulation Agent", 'H', false},
        {"H5", "Dependency Mapping Agent", 'H', false},
        {"H6", "Resilience Metrics Agent", 'H', false},
        {"I1", "Architecture Advisor Agent", 'I', false},
        {"I2", "SSE Process Agent", 'I', false},
        {"I3", "Crypto Architecture Agent", 'I', false},
        {"I4", "Protocol Compliance Agent", 'I', false},
        {"I5", "Pattern Management Agent", 'I', false},
        {"I6", "DevSecOps Pipeline Agent", 'I', false},
        {"J1", "Facility Access Agent", 'J', false},
        {"J2", "Environmental Monitoring Agent", 'J', false},
        {"J3", "Asset Protection Agent", 'J', false},
        {"J4", "Physical Incident Agent", 'J', false},
        {"J5", "Visitor Management Agent", 'J', false},
        {"J6", "Safety Compliance Agent", 'J', false},
        {"K1", "Procurement Policy Agent", 'K', false},
        {"K2", "Authenticity Verification Agent", 'K', false},
        {"K3", "SBOM Analysis Agent", 'K', false},
        {"K4", "Secure Disposal Agent", 'K', false},
        {"L1", "Security Knowledge Agent", 'L', false},
        {"L2", "Security Analytics Agent", 'L', false},
        {"L3", "SOAR Orchestration Agent", 'L', true},
        {"L4", "Data Curation Agent", 'L', false},
        {"L5", "AI Validation Agent", 'L', false},
    };
    return catalog;
}

json agent_catalog_json() {
    json arr = json::array();
    for (const auto& a : agent_catalog()) {
        arr.push_back(json{{"code", a.code},
                           {"name", a.name},
                           {"domain", std::string(1, a.domain)},
                           {"executable", a.executable}});
    }
    return arr;
}

}  // namespace aegis
