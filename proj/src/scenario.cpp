#include "aegis/scenario.hpp"

#include <algorithm>

#include "aegis/logio.hpp"

namespace aegis {

namespace {

RoleCatalog default_role_catalog() {
    auto ent = [](const std::string& sys, ResourceKind kind, const std::string& id) {
        return Entitlement{sys, kind, id};
    };
    RoleCatalog cat;
    cat.roles["fin-analyst"] = {"fin-analyst",
                                {ent("azure_ad", ResourceKind::group, "finance-readers"),
                                 ent("legacy_app", ResourceKind::app_role, "ledger-view"),
                                 ent("okta", ResourceKind::group, "finance")}};
    cat.roles["fin-approver"] = {"fin-approver",
                                 {ent("azure_ad", ResourceKind::group, "finance-approvers"),
                                  ent("legacy_app", ResourceKind::app_role, "ledger-approve"),
                                  ent("payroll_sys", ResourceKind::permission, "payroll-approve")}};
    cat.roles["payroll-admin"] = {"payroll-admin",
                                  {ent("payroll_sys", ResourceKind::app_role, "payroll-admin"),
                                   ent("azure_ad", ResourceKind::group, "hr-systems")}};
    cat.roles["eng-dev"] = {"eng-dev",
                            {ent("github", ResourceKind::group, "eng"),
                             ent("azure_ad", ResourceKind::group, "engineering"),
                             ent("okta", ResourceKind::group, "eng")}};
    cat.roles["eng-admin"] = {"eng-admin",
                              {ent("github", ResourceKind::app_role, "org-admin"),
                               ent("azure_ad", ResourceKind::group, "eng-admins")}};
    cat.roles["hr-generalist"] = {"hr-generalist",
                                  {ent("azure_ad", ResourceKind::group, "hr"),
                                   ent("okta", ResourceKind::group, "hr"),
                                   ent("legacy_app", ResourceKind::app_role, "hr-records")}};
    cat.roles["sales-rep"] = {"sales-rep",
                              {ent("azure_ad", ResourceKind::group, "sales"),
                               ent("okta", ResourceKind::group, "sales")}};
    cat.roles["it-support"] = {"it-support",
                               {ent("azure_ad", ResourceKind::group, "it"),
                                ent("okta", ResourceKind::group, "it"),
                                ent("github", ResourceKind::group, "it-ops")}};

    cat.derivation_rules = {
        {"dr-fin-analyst", {{"department", "Finance"}, {"job_title", "Analyst"}}, {"fin-analyst"}},
        {"dr-fin-controller", {{"department", "Finance"}, {"job_title", "Controller"}}, {"fin-approver"}},
        {"dr-payroll-admin", {{"department", "Finance"}, {"job_title", "Payroll Admin"}}, {"payroll-admin"}},
        {"dr-eng-dev", {{"department", "Engineering"}, {"job_title", "Developer"}}, {"eng-dev"}},
        {"dr-eng-admin", {{"department", "Engineering"}, {"job_title", "Platform Admin"}}, {"eng-admin", "eng-dev"}},
        {"dr-hr", {{"department", "HR"}}, {"hr-generalist"}},
        {"dr-sales", {{"department", "Sales"}}, {"sales-rep"}},
        {"dr-it", {{"department", "IT"}}, {"it-support"}},
    };
    cat.sod_rules = {
        {"sod-ledger",
         {false, "legacy_app|app_role|ledger-view"},
         {false, "legacy_app|app_role|ledger-approve"},
         "high",
         {"SoD.Officer"},
         0},
        {"sod-eng-admin", {true, "eng-dev"}, {true, "eng-admin"}, "medium", {"SoD.Officer"}, 0},
        {"sod-payroll",
         {false, "payroll_sys|permission|payroll-approve"},
         {false, "payroll_sys|app_role|payroll-admin"},
         "critical",
         {"SystemOwner.Payroll"},
         2},
    };
    return cat;
}

AssetInventory default_assets() {
    AssetInventory inv;
    inv.put({"azure_ad", "Azure AD tenant", 0.5, false, {}});
    inv.put({"okta", "Okta org", 0.5, false, {}});
    inv.put({"github", "GitHub org", 0.4, false, {}});
    inv.put({"legacy_app", "Legacy finance app", 0.3, false, {}});
    inv.put({"soar", "SOAR execution plane", 0.2, false, {}});
    inv.put({"payroll_sys", "Payroll system", 0.9, true, {"SystemOwner.Payroll"}});
    inv.put({"srv-db-01", "Production DB cluster", 0.95, true, {"SystemOwner.ServiceX"}});
    inv.put({"wks-1001", "Workstation 1001", 0.2, false, {}});
    inv.put({"wks-1002", "Workstation 1002", 0.2, false, {}});
    inv.put({"srv-api-7", "API server 7", 0.6, false, {}});
    inv.put({"vpn-gw", "VPN gateway", 0.5, false, {}});
    return inv;
}

std::vector<EndpointProfile> default_endpoints() {
    return {
        {"azure_ad", 50, 400, 0.05, 0.0, 0.0},
        {"okta", 50, 300, 0.05, 0.0, 0.0},
        {"github", 50, 300, 0.03, 0.0, 0.0},
        // Flaky enough that a few deliveries exhaust retries, so rollbacks
        // actually occur and their success rate is measurable.
        {"legacy_app", 100, 800, 0.55, 0.0, 0.0},
        {"payroll_sys", 100, 500, 0.02, 0.0, 0.0},
        {"soar", 20, 100, 0.01, 0.0, 0.0},
    };
}

std::vector<RoutingRule> default_rules() {
    RoutingRule hris;
    hris.rule_id = "hris-to-c1";
    hris.priority = 10;
    hris.oc_type = "HrisEvent";
    hris.target_agent = "C1";
    RoutingRule alerts;
    alerts.rule_id = "alerts-to-d2";
    alerts.priority = 10;
    alerts.oc_type = "RawAlert";
    alerts.target_agent = "D2";
    return {hris, alerts};
}

}  // namespace

ScenarioConfig ScenarioConfig::defaults() {
    ScenarioConfig c;
    c.endpoints = default_endpoints();
    c.role_catalog = default_role_catalog();
    c.assets = default_assets();
    c.routing_rules = default_rules();
    return c;
}

json ScenarioConfig::export_json() const {
    json j;
    j["seed"] = seed;
    j["duration_ms"] = duration_ms;
    j["jml_enabled"] = jml_enabled;
    j["soc_enabled"] = soc_enabled;
    j["hris_rates_per_hour"] = hris_rates_per_hour;
    j["alert_rates_per_hour"] = alert_rates_per_hour;
    j["endpoints"] = json::array();
    for (const auto& e : endpoints)
        j["endpoints"].push_back(json{{"target_system", e.target_system},
                                      {"latency_min_ms", e.latency_min_ms},
                                      {"latency_max_ms", e.latency_max_ms},
                                      {"failure_rate", e.failure_rate},
                                      {"duplicate_delivery_rate", e.duplicate_delivery_rate},
                                      {"rollback_failure_rate", e.rollback_failure_rate}});
    j["approval_latency_min_ms"] = approval_latency_min_ms;
    j["approval_latency_max_ms"] = approval_latency_max_ms;
    j["sod_block_fraction"] = sod_block_fraction;
    j["adjudication_unjustified_fraction"] = adjudication_unjustified_fraction;
    j["dispute_fraction"] = dispute_fraction;
    j["disposition_incorrect_fraction"] = disposition_incorrect_fraction;
    j["initial_employees"] = initial_employees;
    j["role_catalog"] = role_catalog.export_json();
    j["assets"] = assets.export_json();
    j["routing_rules"] = json::array();
    for (const auto& r : routing_rules) j["routing_rules"].push_back(to_json(r));
    j["backoff"] = json{{"base_ms", backoff.base_ms},
                        {"factor", backoff.factor},
                        {"cap_ms", backoff.cap_ms},
                        {"max_retries", backoff.max_retries}};
    j["approval_timebox_ms"] = approval_timebox_ms;
    j["soc"] = json{{"window_ms", soc.window_ms},
                    {"burst_threshold", soc.burst_threshold},
                    {"lookback_ms", soc.lookback_ms},
                    {"weights", json{{"w1", soc.weights.w1}, {"w2", soc.weights.w2}, {"w3", soc.weights.w3}}},
                    {"incident_threshold", soc.triage.incident_threshold},
                    {"band_medium_at", soc.triage.cutpoints.medium_at},
                    {"band_high_at", soc.triage.cutpoints.high_at}};
    j["rollback_policy"] = json{{"max_false_alert_rate", rollback_policy.max_false_alert_rate},
                                {"max_ack_p95_ms", rollback_policy.max_ack_p95_ms},
                                {"max_override_rate", rollback_policy.max_override_rate},
                                {"require_valid_attestation",
                                 rollback_policy.require_valid_attestation}};
    j["bursts"] = json::array();
    for (const auto& b : bursts)
        j["bursts"].push_back(json{{"at_ms", b.at_ms},
                                   {"identity_id", b.identity_id},
                                   {"asset_id", b.asset_id},
                                   {"login_failures", b.login_failures},
                                   {"geo_anomalies", b.geo_anomalies},
                                   {"spacing_ms", b.spacing_ms},
                                   {"severity", b.severity},
                                   {"confidence", b.confidence}});
    j["injections"] = json::array();
    for (const auto& i : injections)
        j["injections"].push_back(json{{"kind", i.kind}, {"at_ms", i.at_ms}, {"params", i.params}});
    return j;
}

ScenarioConfig ScenarioConfig::import_json(const json& j) {
    ScenarioConfig c = defaults();
    try {
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("duration_ms")) c.duration_ms = j.at("duration_ms").get<SimTime>();
        if (j.contains("jml_enabled")) c.jml_enabled = j.at("jml_enabled").get<bool>();
        if (j.contains("soc_enabled")) c.soc_enabled = j.at("soc_enabled").get<bool>();
        if (j.contains("hris_rates_per_hour"))
            c.hris_rates_per_hour = j.at("hris_rates_per_hour").get<std::map<std::string, double>>();
        if (j.contains("alert_rates_per_hour"))
            c.alert_rates_per_hour = j.at("alert_rates_per_hour").get<std::map<std::string, double>>();
        if (j.contains("endpoints")) {
            c.endpoints.clear();
            for (const auto& e : j.at("endpoints")) {
                EndpointProfile p;
                p.target_system = e.at("target_system").get<std::string>();
                p.latency_min_ms = e.value("latency_min_ms", SimTime{50});
                p.latency_max_ms = e.value("latency_max_ms", SimTime{400});
                p.failure_rate = e.value("failure_rate", 0.0);
                p.duplicate_delivery_rate = e.value("duplicate_delivery_rate", 0.0);
                p.rollback_failure_rate = e.value("rollback_failure_rate", 0.0);
                if (p.latency_min_ms > p.latency_max_ms)
                    fail(Errc::config_error, "endpoints." + p.target_system + ": latency_min > latency_max");
                for (double rate : {p.failure_rate, p.duplicate_delivery_rate, p.rollback_failure_rate})
                    if (rate < 0.0 || rate > 1.0)
                        fail(Errc::config_error, "endpoints." + p.target_system + ": rate out of [0,1]");
                c.endpoints.push_back(std::move(p));
            }
        }
        if (j.contains("approval_latency_min_ms"))
            c.approval_latency_min_ms = j.at("approval_latency_min_ms").get<SimTime>();
        if (j.contains("approval_latency_max_ms"))
            c.approval_latency_max_ms = j.at("approval_latency_max_ms").get<SimTime>();
        if (j.contains("sod_block_fraction")) c.sod_block_fraction = j.at("sod_block_fraction").get<double>();
        if (j.contains("adjudication_unjustified_fraction"))
            c.adjudication_unjustified_fraction = j.at("adjudication_unjustified_fraction").get<double>();
        if (j.contains("dispute_fraction")) c.dispute_fraction = j.at("dispute_fraction").get<double>();
        if (j.contains("disposition_incorrect_fraction"))
            c.disposition_incorrect_fraction = j.at("disposition_incorrect_fraction").get<double>();
        if (j.contains("initial_employees")) c.initial_employees = j.at("initial_employees").get<int>();
        // Catalog-style sections accept either an inline document or a path.
        auto resolve = [](const json& node) {
            return node.is_string() ? json::parse(read_file(node.get<std::string>())) : node;
        };
        if (j.contains("role_catalog"))
            c.role_catalog = RoleCatalog::import_json(resolve(j.at("role_catalog")));
        if (j.contains("assets")) c.assets = AssetInventory::import_json(resolve(j.at("assets")));
        if (j.contains("routing_rules")) {
            c.routing_rules.clear();
            for (const auto& r : resolve(j.at("routing_rules")))
                c.routing_rules.push_back(routing_rule_from_json(r));
        }
        if (j.contains("backoff")) {
            c.backoff.base_ms = j.at("backoff").value("base_ms", SimTime{1000});
            c.backoff.factor = j.at("backoff").value("factor", 2.0);
            c.backoff.cap_ms = j.at("backoff").value("cap_ms", SimTime{60000});
            c.backoff.max_retries = j.at("backoff").value("max_retries", 5);
        }
        if (j.contains("approval_timebox_ms"))
            c.approval_timebox_ms = j.at("approval_timebox_ms").get<SimTime>();
        if (j.contains("soc")) {
            const auto& s = j.at("soc");
            c.soc.window_ms = s.value("window_ms", c.soc.window_ms);
            c.soc.burst_threshold = s.value("burst_threshold", c.soc.burst_threshold);
            c.soc.lookback_ms = s.value("lookback_ms", c.soc.lookback_ms);
            if (s.contains("weights")) {
                c.soc.weights.w1 = s.at("weights").value("w1", 0.4);
                c.soc.weights.w2 = s.at("weights").value("w2", 0.3);
                c.soc.weights.w3 = s.at("weights").value("w3", 0.3);
            }
            c.soc.triage.incident_threshold = s.value("incident_threshold", 0.6);
            c.soc.triage.cutpoints.medium_at = s.value("band_medium_at", 0.4);
            c.soc.triage.cutpoints.high_at = s.value("band_high_at", 0.7);
        }
        if (j.contains("rollback_policy")) {
            const auto& r = j.at("rollback_policy");
            c.rollback_policy.max_false_alert_rate =
                r.value("max_false_alert_rate", c.rollback_policy.max_false_alert_rate);
            c.rollback_policy.max_ack_p95_ms =
                r.value("max_ack_p95_ms", c.rollback_policy.max_ack_p95_ms);
            c.rollback_policy.max_override_rate =
                r.value("max_override_rate", c.rollback_policy.max_override_rate);
            c.rollback_policy.require_valid_attestation =
                r.value("require_valid_attestation", c.rollback_policy.require_valid_attestation);
        }
        if (j.contains("bursts")) {
            c.bursts.clear();
            for (const auto& b : j.at("bursts")) {
                BurstScript s;
                s.at_ms = b.at("at_ms").get<SimTime>();
                s.identity_id = b.at("identity_id").get<std::string>();
                s.asset_id = b.at("asset_id").get<std::string>();
                s.login_failures = b.value("login_failures", 5);
                s.geo_anomalies = b.value("geo_anomalies", 1);
                s.spacing_ms = b.value("spacing_ms", SimTime{30000});
                s.severity = b.value("severity", 0.8);
                s.confidence = b.value("confidence", 0.9);
                c.bursts.push_back(std::move(s));
            }
        }
        if (j.contains("injections")) {
            for (const auto& i : j.at("injections")) {
                Injection inj;
                inj.kind = i.at("kind").get<std::string>();
                inj.at_ms = i.at("at_ms").get<SimTime>();
                inj.params = i.value("params", json::object());
                c.injections.push_back(std::move(inj));
            }
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(Errc::config_error, e.what());
    }
    if (c.duration_ms <= 0) fail(Errc::config_error, "duration_ms must be positive");
    return c;
}

// --- ScimDirectory -----------------------------------------------------------

ScimDirectory::ApplyResult ScimDirectory::apply(const json& mutation,
                                                const std::string& idempotency_key) {
    ApplyResult result;
    if (applied_keys_.count(idempotency_key)) {
        result.duplicate = true;
        return result;
    }
    std::string system = mutation.at("target_system").get<std::string>();
    std::string employee = mutation.at("employee_id").get<std::string>();
    std::string op = mutation.at("operation_type").get<std::string>();
    const json& payload = mutation.value("scim_payload", json::object());

    auto& accounts = systems_[system];
    if (op == "create") {
        auto it = accounts.find(employee);
        if (it == accounts.end()) {
            Account account;
            account.account_id = "acct-" + employee + "@" + system;
            account.active = payload.value("account_status", "active") == "active";
            if (payload.contains("add_entitlements"))
                for (const auto& e : payload["add_entitlements"])
                    account.entitlements.insert(e.get<std::string>());
            accounts.emplace(employee, std::move(account));
        }
        // create on an existing account is a no-op so prefix rollbacks stay exact
    } else if (op == "update") {
        auto it = accounts.find(employee);
        if (it == accounts.end()) {
            result.ok = false;
            return result;
        }
        if (payload.contains("account_status"))
            it->second.active = payload["account_status"].get<std::string>() == "active";
        if (payload.contains("add_entitlements"))
            for (const auto& e : payload["add_entitlements"])
                it->second.entitlements.insert(e.get<std::string>());
        if (payload.contains("remove_entitlements"))
            for (const auto& e : payload["remove_entitlements"])
                it->second.entitlements.erase(e.get<std::string>());
    } else if (op == "deprovision") {
        accounts.erase(employee);
    } else {
        result.ok = false;
        return result;
    }
    applied_keys_.insert(idempotency_key);
    ++applied_count_;
    return result;
}

IdentityGraphRecord ScimDirectory::view(const std::string& employee_id) const {
    IdentityGraphRecord record;
    record.employee_id = employee_id;
    for (const auto& [system, accounts] : systems_) {
        auto it = accounts.find(employee_id);
        if (it == accounts.end()) continue;
        record.accounts[system] = {it->second.account_id, it->second.active};
        for (const auto& e : it->second.entitlements) record.entitlements.insert(e);
    }
    return record;
}

json ScimDirectory::snapshot() const {
    json j = json::object();
    for (const auto& [system, accounts] : systems_) {
        if (accounts.empty()) continue;  // fully deprovisioned systems vanish
        json sys = json::object();
        for (const auto& [employee, account] : accounts) {
            sys[employee] = json{{"account_id", account.account_id},
                                 {"active", account.active},
                                 {"entitlements", account.entitlements}};
        }
        j[system] = std::move(sys);
    }
    return j;
}

void ScimDirectory::seed_account(const std::string& system, const std::string& employee_id,
                                 const std::set<std::string>& entitlements) {
    Account account;
    account.account_id = "acct-" + employee_id + "@" + system;
    account.active = true;
    account.entitlements = entitlements;
    systems_[system][employee_id] = std::move(account);
}

std::vector<json> access_changes_for(const json& mutation, SimTime occurred_at) {
    std::vector<json> out;
    std::string system = mutation.at("target_system").get<std::string>();
    std::string employee = mutation.at("employee_id").get<std::string>();
    std::string op = mutation.at("operation_type").get<std::string>();
    const json& payload = mutation.value("scim_payload", json::object());
    auto change = [&](const std::string& kind, const std::string& detail) {
        out.push_back(json{{"employee_id", employee},
                           {"target_system", system},
                           {"change_kind", kind},
                           {"detail", detail},
                           {"occurred_at", occurred_at}});
    };
    if (op == "create") {
        change("account_created", "account");
        if (payload.contains("add_entitlements"))
            for (const auto& e : payload["add_entitlements"])
                change("entitlement_added", e.get<std::string>());
    } else if (op == "update") {
        if (payload.contains("account_status"))
            change(payload["account_status"].get<std::string>() == "active" ? "account_enabled"
                                                                            : "account_disabled",
                   "account");
        if (payload.contains("add_entitlements"))
            for (const auto& e : payload["add_entitlements"])
                change("entitlement_added", e.get<std::string>());
        if (payload.contains("remove_entitlements"))
            for (const auto& e : payload["remove_entitlements"])
                change("entitlement_removed", e.get<std::string>());
    } else {
        change("account_disabled", "account");
    }
    return out;
}

}  // namespace aegis
