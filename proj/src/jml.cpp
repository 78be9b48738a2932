#include "aegis/jml.hpp"

#include <algorithm>

namespace aegis {

const char* jml_event_type_name(JmlEventType t) {
    switch (t) {
        case JmlEventType::hire: return "hire";
        case JmlEventType::transfer: return "transfer";
        case JmlEventType::terminate: return "terminate";
        case JmlEventType::extended_leave: return "extended_leave";
        case JmlEventType::return_from_leave: return "return_from_leave";
    }
    return "hire";
}

JmlEventType jml_event_type_from(const std::string& s) {
    if (s == "hire") return JmlEventType::hire;
    if (s == "transfer") return JmlEventType::transfer;
    if (s == "terminate") return JmlEventType::terminate;
    if (s == "extended_leave") return JmlEventType::extended_leave;
    if (s == "return_from_leave") return JmlEventType::return_from_leave;
    fail(Errc::parse_error, "unknown hris event type '" + s + "'");
}

json to_json(const HrisEvent& ev) {
    json j;
    j["event_type"] = jml_event_type_name(ev.event_type);
    j["employee_id"] = ev.employee_id;
    j["name"] = ev.name;
    j["department"] = ev.department;
    j["job_title"] = ev.job_title;
    j["location"] = ev.location;
    if (!ev.manager_id.empty()) j["manager_id"] = ev.manager_id;
    j["employment_type"] = ev.employment_type == EmploymentType::employee ? "employee" : "contractor";
    if (!ev.start_date.empty()) j["start_date"] = ev.start_date;
    if (!ev.end_date.empty()) j["end_date"] = ev.end_date;
    j["effective_ts"] = ev.effective_ts;
    return j;
}

HrisEvent hris_event_from_json(const json& j) {
    HrisEvent ev;
    ev.event_type = jml_event_type_from(j.at("event_type").get<std::string>());
    ev.employee_id = j.at("employee_id").get<std::string>();
    ev.name = j.at("name").get<std::string>();
    ev.department = j.at("department").get<std::string>();
    ev.job_title = j.at("job_title").get<std::string>();
    ev.location = j.at("location").get<std::string>();
    ev.manager_id = j.value("manager_id", "");
    ev.employment_type = j.at("employment_type").get<std::string>() == "contractor"
                             ? EmploymentType::contractor
                             : EmploymentType::employee;
    ev.start_date = j.value("start_date", "");
    ev.end_date = j.value("end_date", "");
    ev.effective_ts = j.at("effective_ts").get<SimTime>();
    return ev;
}

void validate_hris_event(const HrisEvent& ev) {
    if (ev.employee_id.empty()) fail(Errc::invalid_event, "employee_id empty");
    if (ev.event_type == JmlEventType::terminate ||
        ev.event_type == JmlEventType::extended_leave) {
        if (ev.end_date.empty() && ev.effective_ts <= 0)
            fail(Errc::invalid_event,
                 "terminate/extended_leave require end_date or a positive effective_ts");
    }
}

const char* resource_kind_name(ResourceKind k) {
    switch (k) {
        case ResourceKind::group: return "group";
        case ResourceKind::app_role: return "app_role";
        case ResourceKind::permission: return "permission";
    }
    return "group";
}

namespace {

ResourceKind resource_kind_from(const std::string& s) {
    if (s == "group") return ResourceKind::group;
    if (s == "app_role") return ResourceKind::app_role;
    if (s == "permission") return ResourceKind::permission;
    fail(Errc::parse_error, "unknown resource kind '" + s + "'");
}

}  // namespace

std::string Entitlement::key() const {
    return target_system + "|" + resource_kind_name(resource_kind) + "|" + resource_id;
}

Entitlement Entitlement::from_key(const std::string& key) {
    auto first = key.find('|');
    auto second = key.find('|', first + 1);
    if (first == std::string::npos || second == std::string::npos)
        fail(Errc::parse_error, "bad entitlement key '" + key + "'");
    Entitlement e;
    e.target_system = key.substr(0, first);
    e.resource_kind = resource_kind_from(key.substr(first + 1, second - first - 1));
    e.resource_id = key.substr(second + 1);
    return e;
}

json RoleCatalog::export_json() const {
    json j;
    j["roles"] = json::array();
    for (const auto& [id, role] : roles) {
        json ents = json::array();
        for (const auto& e : role.entitlements)
            ents.push_back(json{{"target_system", e.target_system},
                                {"resource_kind", resource_kind_name(e.resource_kind)},
                                {"resource_id", e.resource_id}});
        j["roles"].push_back(json{{"role_id", id}, {"entitlements", std::move(ents)}});
    }
    j["derivation_rules"] = json::array();
    for (const auto& r : derivation_rules)
        j["derivation_rules"].push_back(
            json{{"rule_id", r.rule_id}, {"match", r.match}, {"role_ids", r.role_ids}});
    j["sod_rules"] = json::array();
    for (const auto& r : sod_rules) {
        j["sod_rules"].push_back(json{
            {"rule_id", r.rule_id},
            {"member_a", json{{"kind", r.member_a.is_role ? "role" : "entitlement"}, {"id", r.member_a.id}}},
            {"member_b", json{{"kind", r.member_b.is_role ? "role" : "entitlement"}, {"id", r.member_b.id}}},
            {"severity", r.severity},
            {"approver_chain", r.approver_chain},
            {"droppable", r.droppable}});
    }
    return j;
}

RoleCatalog RoleCatalog::import_json(const json& j) {
    RoleCatalog cat;
    for (const auto& r : j.at("roles")) {
        RoleDef role;
        role.role_id = r.at("role_id").get<std::string>();
        for (const auto& e : r.at("entitlements")) {
            Entitlement ent;
            ent.target_system = e.at("target_system").get<std::string>();
            ent.resource_kind = resource_kind_from(e.at("resource_kind").get<std::string>());
            ent.resource_id = e.at("resource_id").get<std::string>();
            role.entitlements.push_back(std::move(ent));
        }
        cat.roles[role.role_id] = std::move(role);
    }
    for (const auto& r : j.at("derivation_rules")) {
        DerivationRule rule;
        rule.rule_id = r.at("rule_id").get<std::string>();
        rule.match = r.at("match").get<std::map<std::string, std::string>>();
        rule.role_ids = r.at("role_ids").get<std::vector<std::string>>();
        cat.derivation_rules.push_back(std::move(rule));
    }
    for (const auto& r : j.at("sod_rules")) {
        SodRule rule;
        rule.rule_id = r.at("rule_id").get<std::string>();
        rule.member_a = {r.at("member_a").at("kind").get<std::string>() == "role",
                         r.at("member_a").at("id").get<std::string>()};
        rule.member_b = {r.at("member_b").at("kind").get<std::string>() == "role",
                         r.at("member_b").at("id").get<std::string>()};
        rule.severity = r.at("severity").get<std::string>();
        rule.approver_chain = r.at("approver_chain").get<std::vector<std::string>>();
        rule.droppable = r.at("droppable").get<int>();
        cat.sod_rules.push_back(std::move(rule));
    }
    // Referential integrity: SoD role members must exist in the catalog.
    for (const auto& r : cat.sod_rules) {
        for (const auto* m : {&r.member_a, &r.member_b}) {
            if (m->is_role && !cat.roles.count(m->id))
                fail(Errc::config_error, "sod rule " + r.rule_id + " references unknown role " + m->id);
        }
    }
    return cat;
}

namespace {

std::string attr_value(const HrisEvent& ev, const std::string& attr) {
    if (attr == "department") return ev.department;
    if (attr == "job_title") return ev.job_title;
    if (attr == "location") return ev.location;
    if (attr == "employment_type")
        return ev.employment_type == EmploymentType::employee ? "employee" : "contractor";
    return "";
}

}  // namespace

DesiredState resolve_roles(const HrisEvent& ev, const RoleCatalog& catalog) {
    DesiredState desired;
    if (ev.event_type == JmlEventType::terminate ||
        ev.event_type == JmlEventType::extended_leave) {
        desired.disable_all = true;
        return desired;
    }
    for (const auto& rule : catalog.derivation_rules) {
        bool matches = !rule.match.empty();
        for (const auto& [attr, value] : rule.match) {
            if (attr_value(ev, attr) != value) {
                matches = false;
                break;
            }
        }
        if (!matches) continue;
        for (const auto& role_id : rule.role_ids) {
            auto it = catalog.roles.find(role_id);
            if (it == catalog.roles.end()) continue;
            desired.role_ids.insert(role_id);
            for (const auto& e : it->second.entitlements) desired.entitlement_keys.insert(e.key());
        }
    }
    if (desired.role_ids.empty())
        fail(Errc::no_matching_role,
             "no derivation rule matches " + ev.employee_id + " (" + ev.department + "/" +
                 ev.job_title + ")");
    return desired;
}

const char* sod_resolution_name(SodResolution r) {
    switch (r) {
        case SodResolution::pending: return "pending";
        case SodResolution::approved_exception: return "approved_exception";
        case SodResolution::blocked: return "blocked";
    }
    return "pending";
}

namespace {

bool member_in_desired(const DesiredState& desired, const SodMember& m) {
    return m.is_role ? desired.role_ids.count(m.id) > 0 : desired.entitlement_keys.count(m.id) > 0;
}

void drop_member(DesiredState& desired, const SodMember& m, const RoleCatalog& catalog) {
    if (m.is_role) {
        desired.role_ids.erase(m.id);
        desired.entitlement_keys.clear();
        for (const auto& role_id : desired.role_ids) {
            auto it = catalog.roles.find(role_id);
            if (it == catalog.roles.end()) continue;
            for (const auto& e : it->second.entitlements) desired.entitlement_keys.insert(e.key());
        }
    } else {
        desired.entitlement_keys.erase(m.id);
    }
}

}  // namespace

std::vector<SoDViolationRec> sod_check(DesiredState& desired, const IdentityGraphRecord& current,
                                       const RoleCatalog& catalog,
                                       const std::string& employee_id) {
    std::vector<SoDViolationRec> findings;
    for (const auto& rule : catalog.sod_rules) {
        auto present = [&](const SodMember& m) {
            if (m.is_role) return desired.role_ids.count(m.id) > 0;
            return desired.entitlement_keys.count(m.id) > 0 || current.entitlements.count(m.id) > 0;
        };
        if (!present(rule.member_a) || !present(rule.member_b)) continue;
        if (rule.droppable == 1 && member_in_desired(desired, rule.member_a)) {
            drop_member(desired, rule.member_a, catalog);
            continue;
        }
        if (rule.droppable == 2 && member_in_desired(desired, rule.member_b)) {
            drop_member(desired, rule.member_b, catalog);
            continue;
        }
        SoDViolationRec rec;
        rec.employee_id = employee_id;
        rec.rule_id = rule.rule_id;
        rec.member_a = rule.member_a.id;
        rec.member_b = rule.member_b.id;
        rec.severity = rule.severity;
        rec.required_approvers = rule.approver_chain;
        findings.push_back(std::move(rec));
    }
    return findings;
}

namespace {

std::string account_id_for(const std::string& employee_id, const std::string& system) {
    return "acct-" + employee_id + "@" + system;
}

std::set<std::string> systems_of(const std::set<std::string>& entitlement_keys) {
    std::set<std::string> out;
    for (const auto& key : entitlement_keys) out.insert(key.substr(0, key.find('|')));
    return out;
}

json base_mutation(const std::string& employee_id, const std::string& system,
                   const std::string& op, const std::string& reason, SimTime requested_at,
                   SimTime effective_ts, IdSource& ids) {
    json m;
    m["mutation_id"] = ids.fresh("mut");
    m["target_system"] = system;
    m["operation_type"] = op;
    m["target_resource"] = "user";
    if (op != "create") m["target_id"] = account_id_for(employee_id, system);
    m["employee_id"] = employee_id;
    m["scim_payload"] = json::object();
    m["reason"] = reason;
    m["requested_at"] = requested_at;
    m["effective_ts"] = effective_ts;
    return m;
}

}  // namespace

json inverse_mutation(const json& mutation, const IdentityGraphRecord& pre_state, IdSource& ids) {
    std::string op = mutation.at("operation_type").get<std::string>();
    std::string system = mutation.at("target_system").get<std::string>();
    std::string employee = mutation.at("employee_id").get<std::string>();
    SimTime requested_at = mutation.at("requested_at").get<SimTime>();
    SimTime effective_ts = mutation.at("effective_ts").get<SimTime>();
    const json& fwd = mutation.at("scim_payload");

    json inv;
    if (op == "create") {
        inv = base_mutation(employee, system, "deprovision", "remediation", requested_at,
                            effective_ts, ids);
    } else if (op == "update") {
        inv = base_mutation(employee, system, "update", "remediation", requested_at, effective_ts,
                            ids);
        json payload = json::object();
        if (fwd.contains("add_entitlements")) payload["remove_entitlements"] = fwd["add_entitlements"];
        if (fwd.contains("remove_entitlements")) payload["add_entitlements"] = fwd["remove_entitlements"];
        if (fwd.contains("account_status")) {
            auto acct = pre_state.accounts.find(system);
            bool was_active = acct != pre_state.accounts.end() && acct->second.active;
            payload["account_status"] = was_active ? "active" : "disabled";
        }
        inv["scim_payload"] = std::move(payload);
    } else {  // deprovision
        inv = base_mutation(employee, system, "create", "remediation", requested_at, effective_ts,
                            ids);
        json payload = json::object();
        auto acct = pre_state.accounts.find(system);
        payload["account_status"] =
            (acct == pre_state.accounts.end() || acct->second.active) ? "active" : "disabled";
        json adds = json::array();
        for (const auto& key : pre_state.entitlements)
            if (key.substr(0, key.find('|')) == system) adds.push_back(key);
        payload["add_entitlements"] = std::move(adds);
        inv["scim_payload"] = std::move(payload);
    }
    inv["scim_payload"]["rollback"] = true;
    return inv;
}

MutationPlan plan_mutations(const IdentityGraphRecord& current, const DesiredState& desired,
                            JmlEventType trigger, const std::string& reason, SimTime requested_at,
                            SimTime effective_ts, IdSource& ids) {
    (void)trigger;
    MutationPlan plan;
    const std::string& employee = current.employee_id;

    if (desired.disable_all) {
        // Leavers: access removal precedes everything; one deprovision per
        // account removes the account and its entitlements.
        for (const auto& [system, account] : current.accounts) {
            json m = base_mutation(employee, system, "deprovision", reason, requested_at,
                                   effective_ts, ids);
            plan.mutations.push_back(std::move(m));
        }
    } else {
        std::set<std::string> adds, removals;
        for (const auto& key : desired.entitlement_keys)
            if (!current.entitlements.count(key)) adds.insert(key);
        for (const auto& key : current.entitlements)
            if (!desired.entitlement_keys.count(key)) removals.insert(key);

        std::set<std::string> desired_systems = systems_of(desired.entitlement_keys);

        // Creates first for systems without an account.
        for (const auto& system : desired_systems) {
            if (current.accounts.count(system)) continue;
            json m = base_mutation(employee, system, "create", reason, requested_at, effective_ts,
                                   ids);
            m["scim_payload"] = json{{"account_status", "active"}};
            plan.mutations.push_back(std::move(m));
        }

        // One combined update per touched system: enable + adds + removals.
        std::set<std::string> touched = systems_of(adds);
        for (const auto& key : removals) touched.insert(key.substr(0, key.find('|')));
        for (const auto& system : desired_systems) {
            auto acct = current.accounts.find(system);
            if (acct != current.accounts.end() && !acct->second.active) touched.insert(system);
        }
        for (const auto& system : touched) {
            json payload = json::object();
            json sys_adds = json::array(), sys_removes = json::array();
            for (const auto& key : adds)
                if (key.substr(0, key.find('|')) == system) sys_adds.push_back(key);
            for (const auto& key : removals)
                if (key.substr(0, key.find('|')) == system) sys_removes.push_back(key);
            if (!sys_adds.empty()) payload["add_entitlements"] = sys_adds;
            if (!sys_removes.empty()) payload["remove_entitlements"] = sys_removes;
            auto acct = current.accounts.find(system);
            if (desired_systems.count(system) && acct != current.accounts.end() &&
                !acct->second.active)
                payload["account_status"] = "active";
            if (payload.empty()) continue;
            json m =
                base_mutation(employee, system, "update", reason, requested_at, effective_ts, ids);
            m["scim_payload"] = std::move(payload);
            plan.mutations.push_back(std::move(m));
        }
    }

    // Exact inverses in reverse order. Each forward mutation touches a
    // distinct (system, operation) pair, so inverses computed against the
    // pre-plan state are exact.
    for (auto it = plan.mutations.rbegin(); it != plan.mutations.rend(); ++it)
        plan.rollback.push_back(inverse_mutation(*it, current, ids));
    return plan;
}

const char* jml_state_name(JmlState s) {
    switch (s) {
        case JmlState::idle: return "idle";
        case JmlState::awaiting_hris_event: return "awaiting_hris_event";
        case JmlState::role_resolution: return "role_resolution";
        case JmlState::sod_check: return "sod_check";
        case JmlState::awaiting_approval: return "awaiting_approval";
        case JmlState::provisioning: return "provisioning";
        case JmlState::verifying: return "verifying";
        case JmlState::sla_breach: return "sla_breach";
        case JmlState::contest_workflow: return "contest_workflow";
        case JmlState::rolled_back: return "rolled_back";
        case JmlState::closed: return "closed";
    }
    return "idle";
}

bool jml_transition_allowed(JmlState from, JmlState to) {
    if (to == JmlState::contest_workflow)
        return from != JmlState::closed && from != JmlState::rolled_back &&
               from != JmlState::contest_workflow;
    switch (from) {
        case JmlState::idle: return to == JmlState::awaiting_hris_event;
        case JmlState::awaiting_hris_event: return to == JmlState::role_resolution;
        case JmlState::role_resolution: return to == JmlState::sod_check;
        case JmlState::sod_check:
            return to == JmlState::awaiting_approval || to == JmlState::provisioning;
        case JmlState::awaiting_approval: return to == JmlState::provisioning;
        case JmlState::provisioning:
            return to == JmlState::verifying || to == JmlState::rolled_back;
        case JmlState::verifying:
            return to == JmlState::closed || to == JmlState::provisioning ||
                   to == JmlState::rolled_back;
        case JmlState::contest_workflow:
            return to == JmlState::closed || to == JmlState::rolled_back;
        default: return false;
    }
}

SimTime jml_sla_ms(JmlEventType t) {
    switch (t) {
        case JmlEventType::hire:
        case JmlEventType::return_from_leave: return 15 * 60 * 1000;
        case JmlEventType::terminate:
        case JmlEventType::extended_leave: return 5 * 60 * 1000;
        case JmlEventType::transfer: return 10 * 60 * 1000;
    }
    return 15 * 60 * 1000;
}

std::string jml_task_key(const std::string& employee_id, JmlEventType type, SimTime effective_ts) {
    return employee_id + "|" + jml_event_type_name(type) + "|" + std::to_string(effective_ts);
}

// --- engine ------------------------------------------------------------------

void JmlEngine::transition(JmlTask& task, JmlState to, SimTime now) {
    if (!jml_transition_allowed(task.state, to))
        fail(Errc::config_error, std::string("illegal jml transition ") +
                                     jml_state_name(task.state) + " -> " + jml_state_name(to));
    JmlState from = task.state;
    task.state = to;
    task.entered_at[to] = now;
    if (hooks_.on_transition) hooks_.on_transition(task, from, to);
}

std::string JmlEngine::on_hris_event(const HrisEvent& ev, const Envelope& env, SimTime now,
                                     const std::string& hris_node_uri) {
    validate_hris_event(ev);
    std::string key = jml_task_key(ev.employee_id, ev.event_type, ev.effective_ts);
    if (tasks_.count(key)) return key;  // replay: no second task

    JmlTask task;
    task.task_key = key;
    task.task_ref = env.task_id;
    task.employee_id = ev.employee_id;
    task.trigger = ev;
    task.env = env;
    task.hris_node = hris_node_uri;
    task.sla_deadline = ev.effective_ts + jml_sla_ms(ev.event_type);
    auto& stored = tasks_.emplace(key, std::move(task)).first->second;
    transition(stored, JmlState::awaiting_hris_event, now);
    if (ev.effective_ts <= now) start_role_resolution(stored, now);
    return key;
}

void JmlEngine::activate(const std::string& task_key, SimTime now) {
    auto it = tasks_.find(task_key);
    if (it == tasks_.end()) fail(Errc::unknown_target, task_key);
    if (it->second.state != JmlState::awaiting_hris_event) return;
    if (it->second.trigger.effective_ts > now) return;
    start_role_resolution(it->second, now);
}

void JmlEngine::start_role_resolution(JmlTask& task, SimTime now) {
    transition(task, JmlState::role_resolution, now);
    task.sla_deadline = task.trigger.effective_ts + jml_sla_ms(task.trigger.event_type);
    task.pre_state = hooks_.current_view(task.employee_id);

    try {
        task.desired = resolve_roles(task.trigger, catalog_);
    } catch (const Error& e) {
        if (e.code() != Errc::no_matching_role) throw;
        // Role gap: escalate to a human instead of acting (hitl_on_gap).
        json ticket{{"ticket_id", ids_.fresh("ticket")},
                    {"subject_kind", "provisioning_task"},
                    {"subject_ref", task.task_ref},
                    {"summary", "no derivation rule matches employee attributes"},
                    {"severity", "medium"}};
        hooks_.emit("OpenTicket", ticket, task.env, 0.2, {task.hris_node});
        transition(task, JmlState::contest_workflow, now);
        return;
    }
    run_sod_check(task, now);
}

// Systems any planned mutation will touch: grant targets, removal targets,
// and (for leavers) every account-bearing system.
std::set<std::string> JmlEngine::affected_systems(const JmlTask& task,
                                                  const IdentityGraphRecord& current) const {
    std::set<std::string> systems;
    if (task.desired.disable_all) {
        for (const auto& [system, acct] : current.accounts) systems.insert(system);
        return systems;
    }
    for (const auto& k : task.desired.entitlement_keys)
        systems.insert(k.substr(0, k.find('|')));
    for (const auto& k : current.entitlements)
        if (!task.desired.entitlement_keys.count(k)) systems.insert(k.substr(0, k.find('|')));
    return systems;
}

std::set<std::string> JmlEngine::required_cosign_roles(
    const JmlTask& task, const IdentityGraphRecord& current) const {
    std::set<std::string> roles;
    for (const auto& f : task.sod_findings)
        if (f.resolution != SodResolution::blocked)
            for (const auto& r : f.required_approvers) roles.insert(r);
    for (const auto& system : affected_systems(task, current)) {
        const AssetRecord* asset =
            hooks_.asset_for_system ? hooks_.asset_for_system(system) : nullptr;
        if (asset && asset->crown_jewel)
            for (const auto& r : asset->owner_roles) roles.insert(r);
    }
    return roles;
}

void JmlEngine::run_sod_check(JmlTask& task, SimTime now) {
    transition(task, JmlState::sod_check, now);
    IdentityGraphRecord current = hooks_.current_view(task.employee_id);
    task.sod_findings = sod_check(task.desired, current, catalog_, task.employee_id);

    // Crown-jewel targets require owner cosign before any mutation is
    // emitted; SoD approver chains join the same requirement.
    std::set<std::string> roles = required_cosign_roles(task, current);
    task.cosign_roles.assign(roles.begin(), roles.end());

    // Decision artifact for the traceability invariant: one assessment per
    // task, referenced by every mutation it justifies.
    double score = 0.1 + 0.3 * static_cast<double>(task.sod_findings.size());
    if (!task.cosign_roles.empty()) score += 0.2;
    json assessment{{"assessment_id", ids_.fresh("assess")},
                    {"subject_kind", "provisioning_task"},
                    {"subject_ref", task.task_ref},
                    {"risk_score", std::min(score, 1.0)},
                    {"rationale",
                     std::to_string(task.sod_findings.size()) + " sod finding(s), " +
                         std::to_string(task.cosign_roles.size()) + " cosign role(s) required"},
                    {"assessed_at", now}};
    SignedEvent assess_ev = hooks_.emit("RiskAssessment", assessment, task.env, 0.8, {task.hris_node});
    task.assessment_node = event_node_uri(assess_ev.trace_id);

    emit_sod_events(task, now);

    if (!task.cosign_roles.empty()) {
        Envelope env = task.env;
        env.constraints.push_back(Constraint::cosign(task.cosign_roles));
        task.env = env;
        transition(task, JmlState::awaiting_approval, now);
        if (hooks_.request_approvals) hooks_.request_approvals(task.task_key, task.cosign_roles);
        return;
    }
    transition(task, JmlState::provisioning, now);
    start_provisioning(task, now);
}

void JmlEngine::emit_sod_events(JmlTask& task, SimTime now) {
    (void)now;
    for (const auto& f : task.sod_findings) {
        json payload{{"employee_id", f.employee_id},
                     {"rule_id", f.rule_id},
                     {"member_a", f.member_a},
                     {"member_b", f.member_b},
                     {"severity", f.severity},
                     {"required_approvers", f.required_approvers},
                     {"resolution", sod_resolution_name(f.resolution)}};
        hooks_.emit("SoDViolation", payload, task.env, 0.9,
                    {task.hris_node, task.assessment_node});
    }
}

void JmlEngine::on_approval(const std::string& task_key, const Approval& approval, SimTime now) {
    auto it = tasks_.find(task_key);
    if (it == tasks_.end()) fail(Errc::unknown_target, task_key);
    JmlTask& task = it->second;
    if (task.state != JmlState::awaiting_approval) return;  // stale injection

    task.env = record_cosign(task.env, approval, hooks_.verify_approval);

    // A finding becomes an approved exception once its whole chain has
    // cosigned.
    for (auto& f : task.sod_findings) {
        if (f.resolution != SodResolution::pending) continue;
        bool covered = true;
        for (const auto& role : f.required_approvers) {
            bool found = false;
            for (const auto& a : task.env.approvals)
                if (a.role == role) found = true;
            if (!found) covered = false;
        }
        if (covered) {
            f.resolution = SodResolution::approved_exception;
            json payload{{"employee_id", f.employee_id},
                         {"rule_id", f.rule_id},
                         {"member_a", f.member_a},
                         {"member_b", f.member_b},
                         {"severity", f.severity},
                         {"required_approvers", f.required_approvers},
                         {"resolution", sod_resolution_name(f.resolution)}};
            hooks_.emit("SoDViolation", payload, task.env, 0.9,
                        {task.hris_node, task.assessment_node});
        }
    }
    schedule_provisioning_check(task.task_key, now);
}

// Provisioning starts one tick after the covering approval so every
// approval timestamp is strictly before the mutations it gates.
void JmlEngine::schedule_provisioning_check(const std::string& task_key, SimTime now) {
    clock_.schedule(now + 1, [this, task_key] {
        auto it = tasks_.find(task_key);
        if (it != tasks_.end()) maybe_enter_provisioning(it->second, clock_.now());
    });
}

void JmlEngine::on_sod_block(const std::string& task_key, const std::string& rule_id,
                             SimTime now) {
    auto it = tasks_.find(task_key);
    if (it == tasks_.end()) fail(Errc::unknown_target, task_key);
    JmlTask& task = it->second;
    if (task.state != JmlState::awaiting_approval) return;

    const SodRule* rule = nullptr;
    for (const auto& r : catalog_.sod_rules)
        if (r.rule_id == rule_id) rule = &r;
    if (!rule) fail(Errc::unknown_target, "sod rule " + rule_id);

    for (auto& f : task.sod_findings) {
        if (f.rule_id != rule_id || f.resolution != SodResolution::pending) continue;
        f.resolution = SodResolution::blocked;
        // The block stands: the desired-side member is dropped and the task
        // proceeds with reduced access.
        if (member_in_desired(task.desired, rule->member_b))
            drop_member(task.desired, rule->member_b, catalog_);
        else if (member_in_desired(task.desired, rule->member_a))
            drop_member(task.desired, rule->member_a, catalog_);
        json payload{{"employee_id", f.employee_id},
                     {"rule_id", f.rule_id},
                     {"member_a", f.member_a},
                     {"member_b", f.member_b},
                     {"severity", f.severity},
                     {"required_approvers", f.required_approvers},
                     {"resolution", sod_resolution_name(f.resolution)}};
        hooks_.emit("SoDViolation", payload, task.env, 0.9,
                    {task.hris_node, task.assessment_node});
    }

    // Rebuild the cosign requirement without the blocked chains; removal
    // targets keep their crown-jewel owners in the required set.
    IdentityGraphRecord current = hooks_.current_view(task.employee_id);
    std::set<std::string> roles = required_cosign_roles(task, current);
    task.cosign_roles.assign(roles.begin(), roles.end());
    Envelope env = task.env;
    std::erase_if(env.constraints,
                  [](const Constraint& c) { return c.kind == ConstraintKind::policy_cosign; });
    if (!task.cosign_roles.empty())
        env.constraints.push_back(Constraint::cosign(task.cosign_roles));
    task.env = env;

    schedule_provisioning_check(task.task_key, now);
}

void JmlEngine::maybe_enter_provisioning(JmlTask& task, SimTime now) {
    if (task.state != JmlState::awaiting_approval) return;
    for (const auto& f : task.sod_findings)
        if (f.resolution == SodResolution::pending) return;
    if (!cosign_satisfied(task.env)) return;
    transition(task, JmlState::provisioning, now);
    start_provisioning(task, now);
}

void JmlEngine::start_provisioning(JmlTask& task, SimTime now) {
    IdentityGraphRecord current = hooks_.current_view(task.employee_id);
    std::string reason;
    switch (task.trigger.event_type) {
        case JmlEventType::hire:
        case JmlEventType::return_from_leave: reason = "joiner"; break;
        case JmlEventType::transfer: reason = "mover"; break;
        default: reason = "leaver"; break;
    }
    MutationPlan plan = plan_mutations(current, task.desired, task.trigger.event_type, reason, now,
                                       task.trigger.effective_ts, ids_);
    task.plan = plan.mutations;
    task.plan_rollback = plan.rollback;
    task.next_mutation = 0;
    if (task.plan.empty()) {
        enter_verifying(task, now);
        return;
    }
    submit_next_mutation(task, now);
}

SignedEvent JmlEngine::emit_mutation(JmlTask& task, const json& payload, SimTime now) {
    (void)now;
    std::vector<std::string> refs{task.hris_node};
    if (!task.assessment_node.empty()) refs.push_back(task.assessment_node);
    return hooks_.emit("SCIMMutation", payload, task.env, 0.9, refs);
}

// True when a delivery with the same recipe key already exists; the caller
// must wait out the 60 s floor window so the re-submission gets a fresh key.
bool JmlEngine::must_defer(const json& payload, SimTime now, SimTime& retry_at) const {
    if (!hooks_.find_delivery) return false;
    const auto& def = schemas_.get("SCIMMutation", 1);
    std::string key = idempotency_key(payload, def, now);
    if (!hooks_.find_delivery(key)) return false;
    SimTime floor_ms = def.floor_seconds * 1000;
    retry_at = (now / floor_ms + 1) * floor_ms;
    return true;
}

void JmlEngine::submit_next_mutation(JmlTask& task, SimTime now) {
    if (task.next_mutation >= task.plan.size()) return;
    json payload = task.plan[task.next_mutation];

    SimTime retry_at = 0;
    if (must_defer(payload, now, retry_at)) {
        std::string key = task.task_key;
        clock_.schedule(retry_at, [this, key] {
            auto it = tasks_.find(key);
            if (it == tasks_.end()) return;
            if (it->second.state != JmlState::provisioning || it->second.rollback_active) return;
            submit_next_mutation(it->second, clock_.now());
        });
        return;
    }

    SignedEvent ev = emit_mutation(task, payload, now);
    delivery_to_task_[ev.idempotency_key] = task.task_key;
    delivery_is_rollback_[ev.idempotency_key] = false;
    task.submitted_keys.push_back(ev.idempotency_key);
    task.next_mutation += 1;
    task.in_flight_forward += 1;
    hooks_.submit(ev);
}

void JmlEngine::begin_rollback(JmlTask& task, SimTime now) {
    task.rollback_active = true;
    // An in-flight forward mutation may still apply; wait for it so the
    // inverse stack is complete before unwinding.
    if (task.in_flight_forward > 0) return;
    submit_next_rollback(task, now);
}

void JmlEngine::submit_next_rollback(JmlTask& task, SimTime now) {
    if (task.applied_inverses.empty()) {
        if (hooks_.on_rollback_outcome) hooks_.on_rollback_outcome(task, !task.rollback_failed);
        finish(task, JmlState::rolled_back, now);
        return;
    }
    json payload = task.applied_inverses.back();

    SimTime retry_at = 0;
    if (must_defer(payload, now, retry_at)) {
        std::string key = task.task_key;
        clock_.schedule(retry_at, [this, key] {
            auto it = tasks_.find(key);
            if (it == tasks_.end()) return;
            if (!it->second.rollback_active) return;
            submit_next_rollback(it->second, clock_.now());
        });
        return;
    }

    task.applied_inverses.pop_back();
    SignedEvent ev = emit_mutation(task, payload, now);
    delivery_to_task_[ev.idempotency_key] = task.task_key;
    delivery_is_rollback_[ev.idempotency_key] = true;
    hooks_.submit(ev);
}

void JmlEngine::on_delivery_update(const std::string& idempotency_key, DeliveryStatus status,
                                   SimTime now) {
    auto map_it = delivery_to_task_.find(idempotency_key);
    if (map_it == delivery_to_task_.end()) return;
    JmlTask& task = tasks_.at(map_it->second);
    bool is_rollback = delivery_is_rollback_[idempotency_key];

    if (status == DeliveryStatus::acked) {
        if (is_rollback) {
            if (task.state == JmlState::rolled_back || task.state == JmlState::closed) return;
            submit_next_rollback(task, now);
            return;
        }
        task.in_flight_forward -= 1;
        // The acked mutation is the last submitted one; remember its inverse.
        std::size_t index = task.next_mutation - 1;
        if (index < task.plan_rollback.size())
            task.applied_inverses.push_back(task.plan_rollback[task.plan.size() - 1 - index]);
        if (task.rollback_active) {
            if (task.in_flight_forward == 0) submit_next_rollback(task, now);
            return;
        }
        if (task.state == JmlState::contest_workflow) return;  // frozen
        if (task.state != JmlState::provisioning) return;
        if (task.next_mutation < task.plan.size())
            submit_next_mutation(task, now);
        else
            enter_verifying(task, now);
        return;
    }

    if (status == DeliveryStatus::failed_permanent) {
        if (is_rollback) {
            task.rollback_failed = true;
            if (hooks_.on_rollback_outcome) hooks_.on_rollback_outcome(task, false);
            finish(task, JmlState::rolled_back, now);
            return;
        }
        task.in_flight_forward -= 1;
        if (task.rollback_active) {
            if (task.in_flight_forward == 0) submit_next_rollback(task, now);
            return;
        }
        if (task.state == JmlState::contest_workflow) return;
        if (task.state != JmlState::provisioning && task.state != JmlState::verifying) return;
        begin_rollback(task, now);
    }
}

void JmlEngine::enter_verifying(JmlTask& task, SimTime now) {
    transition(task, JmlState::verifying, now);
    IdentityGraphRecord observed = hooks_.observe_directory(task.employee_id);

    bool match;
    if (task.desired.disable_all) {
        match = observed.accounts.empty() && observed.entitlements.empty();
    } else {
        match = observed.entitlements == task.desired.entitlement_keys;
        for (const auto& key : task.desired.entitlement_keys) {
            std::string system = key.substr(0, key.find('|'));
            auto it = observed.accounts.find(system);
            if (it == observed.accounts.end() || !it->second.active) match = false;
        }
    }

    if (match) {
        task.completed_at = now;
        finish(task, JmlState::closed, now);
        return;
    }
    if (!task.remediated) {
        // One bounded self-heal: re-plan the remaining diff, then give up.
        task.remediated = true;
        transition(task, JmlState::provisioning, now);
        MutationPlan plan = plan_mutations(observed, task.desired, task.trigger.event_type,
                                           "remediation", now, task.trigger.effective_ts, ids_);
        task.plan = plan.mutations;
        task.plan_rollback = plan.rollback;
        task.next_mutation = 0;
        if (task.plan.empty()) {
            enter_verifying(task, now);
            return;
        }
        submit_next_mutation(task, now);
        return;
    }
    begin_rollback(task, now);
}

void JmlEngine::on_dispute(const std::string& task_key, SimTime now) {
    auto it = tasks_.find(task_key);
    if (it == tasks_.end()) fail(Errc::unknown_target, task_key);
    JmlTask& task = it->second;
    if (task.state == JmlState::closed || task.state == JmlState::rolled_back ||
        task.state == JmlState::contest_workflow)
        return;
    transition(task, JmlState::contest_workflow, now);
}

void JmlEngine::on_contest_disposition(const std::string& task_key, bool uphold, SimTime now) {
    auto it = tasks_.find(task_key);
    if (it == tasks_.end()) fail(Errc::unknown_target, task_key);
    JmlTask& task = it->second;
    if (task.state != JmlState::contest_workflow) return;
    if (uphold) {
        finish(task, JmlState::closed, now);
        return;
    }
    begin_rollback(task, now);
}

void JmlEngine::check_sla(const std::string& task_key, SimTime now) {
    auto it = tasks_.find(task_key);
    if (it == tasks_.end()) return;
    JmlTask& task = it->second;
    if (task.sla_breached) return;
    bool terminal = task.state == JmlState::closed || task.state == JmlState::rolled_back;
    if (!terminal && now > task.sla_deadline) {
        task.sla_breached = true;
        if (hooks_.on_sla_breach) hooks_.on_sla_breach(task);
    }
}

void JmlEngine::finish(JmlTask& task, JmlState terminal, SimTime now) {
    transition(task, terminal, now);
    if (task.completed_at && *task.completed_at > task.sla_deadline && !task.sla_breached) {
        task.sla_breached = true;
        if (hooks_.on_sla_breach) hooks_.on_sla_breach(task);
    }
    if (hooks_.on_terminal) hooks_.on_terminal(task);
}

const JmlTask* JmlEngine::find_task(const std::string& task_key) const {
    auto it = tasks_.find(task_key);
    return it == tasks_.end() ? nullptr : &it->second;
}

}  // namespace aegis
