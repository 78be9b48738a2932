#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aegis/catalog.hpp"
#include "aegis/contracts.hpp"
#include "aegis/evidence.hpp"
#include "aegis/invariants.hpp"
#include "aegis/jml.hpp"
#include "aegis/orchestrator.hpp"
#include "aegis/runtime.hpp"
#include "aegis/simclock.hpp"
#include "aegis/soc.hpp"

namespace aegis {

// ---------------------------------------------------------------------------
// Seeded discrete-event simulation driver: generates HRIS and alert streams,
// simulates SCIM endpoints with fault injection, injects approvals,
// disputes, and adjudications, and computes SLO reports.
// ---------------------------------------------------------------------------

struct EndpointProfile {
    std::string target_system;
    SimTime latency_min_ms = 50;
    SimTime latency_max_ms = 400;
    double failure_rate = 0.0;
    double duplicate_delivery_rate = 0.0;
    double rollback_failure_rate = 0.0;
};

struct BurstScript {
    SimTime at_ms = 0;
    std::string identity_id;
    std::string asset_id;
    int login_failures = 5;
    int geo_anomalies = 1;
    SimTime spacing_ms = 30'000;
    double severity = 0.8;
    double confidence = 0.9;
};

struct Injection {
    std::string kind;  // approval | dispute | adjudication | defect
    SimTime at_ms = 0;
    json params;
};

struct ScenarioConfig {
    std::uint64_t seed = 42;
    SimTime duration_ms = 8LL * 3600 * 1000;
    bool jml_enabled = true;
    bool soc_enabled = true;

    std::map<std::string, double> hris_rates_per_hour = {
        {"hire", 6.0}, {"transfer", 3.0}, {"terminate", 2.0},
        {"extended_leave", 1.0}, {"return_from_leave", 1.0}};
    std::map<std::string, double> alert_rates_per_hour = {
        {"login_failure", 30.0}, {"geo_anomaly", 4.0}, {"token_misuse", 2.0},
        {"malware", 1.0}, {"other", 6.0}};

    std::vector<EndpointProfile> endpoints;
    SimTime approval_latency_min_ms = 60'000;
    SimTime approval_latency_max_ms = 180'000;
    double sod_block_fraction = 0.25;
    double adjudication_unjustified_fraction = 0.0;
    double dispute_fraction = 0.0;
    double disposition_incorrect_fraction = 0.05;
    int initial_employees = 40;

    RoleCatalog role_catalog;
    AssetInventory assets;
    std::vector<RoutingRule> routing_rules;
    BackoffPolicy backoff;
    SimTime approval_timebox_ms = 30 * 60 * 1000;
    SocConfig soc;
    RollbackPolicy rollback_policy;
    std::vector<BurstScript> bursts;
    std::vector<Injection> injections;

    static ScenarioConfig defaults();

    json export_json() const;
    static ScenarioConfig import_json(const json& j);  // defaults + overrides
};

struct SloReport {
    SimTime window_ms = 0;
    std::optional<SimTime> joiner_p95_ms;
    std::optional<SimTime> leaver_p95_ms;
    std::optional<SimTime> mover_p95_ms;
    std::optional<double> sod_false_block_rate;
    std::optional<double> rollback_success_rate;
    std::map<std::string, AgentSLO> agent_slos;
    std::map<std::string, std::size_t> task_outcomes;
    std::size_t sla_breaches = 0;
    std::size_t clusters = 0;
    std::size_t incidents = 0;
    std::size_t events_total = 0;
    json audit;  // optional invariant audit summary
};

json to_json(const SloReport& report);

// Brute-force recomputation from the raw log; the in-run report uses the
// same function so `report` on a saved log reproduces it.
SloReport compute_slo_report(const std::vector<SignedEvent>& events, const ScenarioConfig& config);

// Consumer-side simulated directory: one account per (system, employee),
// idempotency-key dedup, applied-mutation counting.
class ScimDirectory {
public:
    struct Account {
        std::string account_id;
        bool active = true;
        std::set<std::string> entitlements;

        bool operator==(const Account&) const = default;
    };

    struct ApplyResult {
        bool ok = true;          // op was semantically applicable
        bool duplicate = false;  // idempotency key already applied
    };

    ApplyResult apply(const json& mutation, const std::string& idempotency_key);

    IdentityGraphRecord view(const std::string& employee_id) const;
    json snapshot() const;
    std::size_t applied_count() const { return applied_count_; }
    std::size_t distinct_keys() const { return applied_keys_.size(); }

    void seed_account(const std::string& system, const std::string& employee_id,
                      const std::set<std::string>& entitlements);

private:
    std::map<std::string, std::map<std::string, Account>> systems_;
    std::set<std::string> applied_keys_;
    std::size_t applied_count_ = 0;
};

// AccessChangeEvent payloads implied by an acked mutation.
std::vector<json> access_changes_for(const json& mutation, SimTime occurred_at);

struct RunResult {
    std::vector<SignedEvent> events;
    json graph;
    json registry;
    SloReport report;
    json directory_snapshot;
    AuditReport audit;
    // Config-driven defect injections applied to the finished log:
    // (trace_id -> expected invariant), for soundness bookkeeping.
    std::vector<std::pair<std::string, std::string>> defect_ledger;
    std::map<std::string, LifecycleDecision> lifecycle_decisions;  // by agent code
};

class Scenario {
public:
    explicit Scenario(ScenarioConfig config);
    ~Scenario();

    RunResult run();

    // Deterministic defect injection into a finished log: strips policy
    // refs or evidence refs, flips signature bytes, or drops approvals from
    // crown-jewel-gated actions. Returns the (trace_id -> expected
    // invariant) ledger.
    static std::vector<std::pair<std::string, std::string>> inject_defects(
        std::vector<SignedEvent>& events, std::size_t count, std::uint64_t seed,
        const SchemaRegistry& schemas, const AssetInventory& assets);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Writes events.jsonl, graph.json, report.json, registry.json, config.json
// under out_dir (created if needed).
void write_run_outputs(const std::string& out_dir, const RunResult& result,
                       const ScenarioConfig& config);

}  // namespace aegis
