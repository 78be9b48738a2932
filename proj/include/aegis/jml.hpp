#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aegis/contracts.hpp"
#include "aegis/evidence.hpp"
#include "aegis/orchestrator.hpp"

namespace aegis {

// ---------------------------------------------------------------------------
// C1 identity-lifecycle agent: consumes HRIS joiner/mover/leaver events,
// resolves roles, checks separation of duties, plans and executes SCIM
// mutations through the orchestrator, verifies, and rolls back.
// ---------------------------------------------------------------------------

enum class JmlEventType { hire, transfer, terminate, extended_leave, return_from_leave };

const char* jml_event_type_name(JmlEventType t);
JmlEventType jml_event_type_from(const std::string& s);

enum class EmploymentType { employee, contractor };

struct HrisEvent {
    JmlEventType event_type = JmlEventType::hire;
    std::string employee_id;
    std::string name;
    std::string department;
    std::string job_title;
    std::string location;
    std::string manager_id;
    EmploymentType employment_type = EmploymentType::employee;
    std::string start_date;
    std::string end_date;
    SimTime effective_ts = 0;
};

json to_json(const HrisEvent& ev);
HrisEvent hris_event_from_json(const json& j);

// Throws InvalidEvent on violated type invariants.
void validate_hris_event(const HrisEvent& ev);

enum class ResourceKind { group, app_role, permission };

const char* resource_kind_name(ResourceKind k);

struct Entitlement {
    std::string target_system;
    ResourceKind resource_kind = ResourceKind::group;
    std::string resource_id;

    // "system|kind|id", the canonical set-member form.
    std::string key() const;
    static Entitlement from_key(const std::string& key);

    auto operator<=>(const Entitlement&) const = default;
};

struct RoleDef {
    std::string role_id;
    std::vector<Entitlement> entitlements;
};

struct DerivationRule {
    std::string rule_id;
    // attribute -> required value over {department, job_title, location,
    // employment_type}; all entries must match.
    std::map<std::string, std::string> match;
    std::vector<std::string> role_ids;
};

struct SodMember {
    bool is_role = true;
    std::string id;  // role_id or entitlement key

    bool operator==(const SodMember&) const = default;
};

struct SodRule {
    std::string rule_id;
    SodMember member_a;
    SodMember member_b;
    std::string severity = "high";
    std::vector<std::string> approver_chain;
    // 0 = none, 1 = member_a, 2 = member_b may be dropped from the desired
    // set instead of raising a violation.
    int droppable = 0;
};

struct RoleCatalog {
    std::map<std::string, RoleDef> roles;
    std::vector<DerivationRule> derivation_rules;
    std::vector<SodRule> sod_rules;

    json export_json() const;
    static RoleCatalog import_json(const json& j);
};

struct AccountInfo {
    std::string account_id;
    bool active = true;
};

struct IdentityGraphRecord {
    std::string employee_id;
    std::map<std::string, AccountInfo> accounts;  // target_system -> account
    std::set<std::string> entitlements;           // entitlement keys

    bool operator==(const IdentityGraphRecord&) const = default;
};

struct DesiredState {
    std::set<std::string> role_ids;
    std::set<std::string> entitlement_keys;
    bool disable_all = false;
};

// Union of entitlements of all roles whose derivation predicates match.
// terminate/extended_leave yield empty + disable intent. Throws
// NoMatchingRole for hire/return/transfer events matching no rule.
DesiredState resolve_roles(const HrisEvent& ev, const RoleCatalog& catalog);

enum class SodResolution { pending, approved_exception, blocked };

const char* sod_resolution_name(SodResolution r);

struct SoDViolationRec {
    std::string employee_id;
    std::string rule_id;
    std::string member_a;
    std::string member_b;
    std::string severity;
    std::vector<std::string> required_approvers;
    SodResolution resolution = SodResolution::pending;
};

// One violation per rule with both members present in desired+current;
// droppable rules remove the marked member from `desired` instead.
std::vector<SoDViolationRec> sod_check(DesiredState& desired, const IdentityGraphRecord& current,
                                       const RoleCatalog& catalog, const std::string& employee_id);

struct MutationPlan {
    std::vector<json> mutations;  // SCIMMutation payloads, in submission order
    std::vector<json> rollback;   // exact inverses, reverse order
};

// Joiners: create then entitlement adds. Movers: adds before removals.
// Leavers: access removal first (deprovision per system). Each payload
// carries reason in {joiner, mover, leaver, remediation}.
MutationPlan plan_mutations(const IdentityGraphRecord& current, const DesiredState& desired,
                            JmlEventType trigger, const std::string& reason, SimTime requested_at,
                            SimTime effective_ts, IdSource& ids);

// Inverse of one applied mutation, computed against the state it applied to.
json inverse_mutation(const json& mutation, const IdentityGraphRecord& pre_state, IdSource& ids);

enum class JmlState {
    idle,
    awaiting_hris_event,
    role_resolution,
    sod_check,
    awaiting_approval,
    provisioning,
    verifying,
    sla_breach,
    contest_workflow,
    rolled_back,
    closed,
};

const char* jml_state_name(JmlState s);

bool jml_transition_allowed(JmlState from, JmlState to);

// SLA per event type: hire/return 15 min, terminate/extended_leave 5 min,
// transfer 10 min.
SimTime jml_sla_ms(JmlEventType t);

struct JmlTask {
    std::string task_key;  // employee_id|event_type|effective_ts
    std::string task_ref;  // envelope task id
    std::string employee_id;
    HrisEvent trigger;
    JmlState state = JmlState::idle;
    std::map<JmlState, SimTime> entered_at;
    Envelope env;
    DesiredState desired;
    IdentityGraphRecord pre_state;
    std::vector<json> plan;
    std::vector<json> plan_rollback;  // plan_rollback[n-1-k] inverts plan[k]
    std::size_t next_mutation = 0;
    std::vector<json> applied_inverses;  // stack of inverses of acked mutations
    std::vector<std::string> submitted_keys;
    SimTime sla_deadline = 0;
    bool sla_breached = false;
    bool remediated = false;
    bool rollback_active = false;
    bool rollback_failed = false;
    int in_flight_forward = 0;  // submitted forward mutations awaiting resolution
    std::vector<SoDViolationRec> sod_findings;
    std::vector<std::string> cosign_roles;  // required before provisioning
    std::optional<SimTime> completed_at;    // provisioning completion
    std::string assessment_node;            // decision artifact node uri
    std::string hris_node;                  // triggering event node uri
};

struct JmlHooks {
    // Sign + log + persist an event produced by C1 under `env`.
    std::function<SignedEvent(const std::string& oc_type, const json& payload, const Envelope& env,
                              double confidence, const std::vector<std::string>& evidence_refs)>
        emit;
    // Submit a state-changing event to the orchestrator.
    std::function<DeliveryState(const SignedEvent&)> submit;
    // Lookup of an existing delivery by idempotency key; used to defer
    // re-submissions that would collide inside one recipe floor window.
    std::function<const DeliveryState*(const std::string& idempotency_key)> find_delivery;
    ApprovalVerifier verify_approval;
    // Crown-jewel lookup for a target system (nullptr = not an asset).
    std::function<const AssetRecord*(const std::string& target_system)> asset_for_system;
    // The C-domain identity-graph view (updated by delivery side effects).
    std::function<IdentityGraphRecord(const std::string& employee_id)> current_view;
    // Ground-truth directory state for verification.
    std::function<IdentityGraphRecord(const std::string& employee_id)> observe_directory;
    // Ask the environment to produce approvals for the given roles.
    std::function<void(const std::string& task_key, const std::vector<std::string>& roles)>
        request_approvals;
    std::function<void(const JmlTask& task, JmlState from, JmlState to)> on_transition;
    std::function<void(const JmlTask& task)> on_sla_breach;
    std::function<void(const JmlTask& task, bool success)> on_rollback_outcome;
    std::function<void(const JmlTask& task)> on_terminal;
};

class JmlEngine {
public:
    JmlEngine(const RoleCatalog& catalog, const SchemaRegistry& schemas, SimClock& clock,
              IdSource& ids)
        : catalog_(catalog), schemas_(schemas), clock_(clock), ids_(ids) {}

    JmlHooks& hooks() { return hooks_; }

    // Idempotent per (employee_id, event_type, effective_ts); returns the
    // task key. Advances immediately when effective_ts <= now.
    std::string on_hris_event(const HrisEvent& ev, const Envelope& env, SimTime now,
                              const std::string& hris_node_uri);

    // Future-dated events park in awaiting_hris_event until activated.
    void activate(const std::string& task_key, SimTime now);

    void on_approval(const std::string& task_key, const Approval& approval, SimTime now);

    // Adjudicated block of one pending finding: the desired-side member is
    // dropped and provisioning proceeds without it.
    void on_sod_block(const std::string& task_key, const std::string& rule_id, SimTime now);

    void on_delivery_update(const std::string& idempotency_key, DeliveryStatus status,
                            SimTime now);

    void on_dispute(const std::string& task_key, SimTime now);
    void on_contest_disposition(const std::string& task_key, bool uphold, SimTime now);

    // Scheduled at sla_deadline + 1; also called on completion.
    void check_sla(const std::string& task_key, SimTime now);

    const JmlTask* find_task(const std::string& task_key) const;
    const std::map<std::string, JmlTask>& tasks() const { return tasks_; }

private:
    void transition(JmlTask& task, JmlState to, SimTime now);
    void start_role_resolution(JmlTask& task, SimTime now);
    void run_sod_check(JmlTask& task, SimTime now);
    std::set<std::string> affected_systems(const JmlTask& task,
                                           const IdentityGraphRecord& current) const;
    std::set<std::string> required_cosign_roles(const JmlTask& task,
                                                const IdentityGraphRecord& current) const;
    void maybe_enter_provisioning(JmlTask& task, SimTime now);
    void schedule_provisioning_check(const std::string& task_key, SimTime now);
    void start_provisioning(JmlTask& task, SimTime now);
    void submit_next_mutation(JmlTask& task, SimTime now);
    void begin_rollback(JmlTask& task, SimTime now);
    void submit_next_rollback(JmlTask& task, SimTime now);
    void enter_verifying(JmlTask& task, SimTime now);
    void emit_sod_events(JmlTask& task, SimTime now);
    void finish(JmlTask& task, JmlState terminal, SimTime now);
    SignedEvent emit_mutation(JmlTask& task, const json& payload, SimTime now);
    bool must_defer(const json& payload, SimTime now, SimTime& retry_at) const;

    const RoleCatalog& catalog_;
    const SchemaRegistry& schemas_;
    SimClock& clock_;
    IdSource& ids_;
    JmlHooks hooks_;
    std::map<std::string, JmlTask> tasks_;
    std::map<std::string, std::string> delivery_to_task_;  // idempotency key -> task key
    std::map<std::string, bool> delivery_is_rollback_;
};

std::string jml_task_key(const std::string& employee_id, JmlEventType type, SimTime effective_ts);

}  // namespace aegis
