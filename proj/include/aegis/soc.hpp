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
#include "aegis/runtime.hpp"

namespace aegis {

// ---------------------------------------------------------------------------
// Enterprise SOC pipeline over synthetic telemetry: D2 alert clustering and
// risk scoring, G1 triage, G4 timeline reconstruction, L3 playbook routing,
// A2/A7 metrics.
// ---------------------------------------------------------------------------

enum class AlertSource { siem, edr, idp };
enum class AlertType { login_failure, geo_anomaly, token_misuse, malware, other };

const char* alert_source_name(AlertSource s);
const char* alert_type_name(AlertType t);
AlertSource alert_source_from(const std::string& s);
AlertType alert_type_from(const std::string& s);

struct RawAlert {
    std::string alert_id;
    AlertSource source = AlertSource::siem;
    AlertType alert_type = AlertType::login_failure;
    std::string identity_id;
    std::string asset_id;
    double severity = 0.0;
    double confidence = 0.0;
    SimTime observed_at = 0;
};

json to_json(const RawAlert& a);
RawAlert raw_alert_from_json(const json& j);

struct RiskInputs {
    double severity = 0.0;
    double confidence = 0.0;
    double asset_criticality = 0.0;
};

struct RiskWeights {
    double w1 = 0.4;
    double w2 = 0.3;
    double w3 = 0.3;
};

// risk = w1*severity + w2*confidence + w3*asset_criticality.
double risk_score(const RiskInputs& x, const RiskWeights& w);

struct AlertCluster {
    std::string cluster_id;
    std::vector<std::string> alert_ids;
    std::string identity_id;
    SimTime window_start = 0;
    SimTime window_end = 0;
    double score = 0.0;
    json features;

    json payload() const;
};

// Deterministic greedy session grouping per identity: a group is the maximal
// run of time-sorted alerts with observed_at - group_start <= window_ms. A
// group becomes a cluster iff its size >= burst_threshold or it spans >= 2
// distinct alert types. Cluster severity = max member severity, confidence =
// mean member confidence, criticality = most critical touched asset.
std::vector<AlertCluster> cluster_alerts(std::vector<RawAlert> alerts, SimTime window_ms,
                                         std::size_t burst_threshold, const RiskWeights& weights,
                                         const AssetInventory& assets, IdSource& ids);

enum class SeverityBand { low, medium, high };

const char* severity_band_name(SeverityBand b);

struct BandCutpoints {
    double medium_at = 0.4;
    double high_at = 0.7;
};

SeverityBand severity_band(double score, const BandCutpoints& cuts);

struct TriageConfig {
    double incident_threshold = 0.6;  // strict >
    BandCutpoints cutpoints;
};

struct TriageDecision {
    json incident_payload;       // IncidentCase
    SeverityBand band;
    bool crown_jewel_involved = false;
    std::string primary_asset;
};

// Opens an incident iff score > threshold (strict).
std::optional<TriageDecision> triage(const AlertCluster& cluster, const TriageConfig& config,
                                     const AssetInventory& assets, IdSource& ids, SimTime now);

struct TimelineEntry {
    SimTime at = 0;
    std::string event_ref;
    std::string description;
};

// Sorted ascending by (at, event_ref).
json timeline_payload(const std::string& incident_ref, std::vector<TimelineEntry> entries);

struct PlaybookAction {
    std::string oc_type;  // RevokeTokens | ForcePasswordReset | OpenTicket
    bool requires_cosign = false;
};

// Declared policy table over (severity band x crown-jewel involvement).
std::vector<PlaybookAction> playbook_actions(SeverityBand band, bool crown_jewel);

// A7 aggregation over IncidentSummary payloads.
json aggregate_metrics(const std::vector<json>& summaries, SimTime window_start,
                       SimTime window_end, IdSource& ids);

struct SocHooks {
    // Sign + log + persist an event produced by the named agent.
    std::function<SignedEvent(const std::string& agent_code, const std::string& oc_type,
                              const json& payload, const Envelope& env, double confidence,
                              const std::vector<std::string>& evidence_refs)>
        emit;
    // Optional bounded judgment plugin for non-load-bearing summaries.
    JudgmentPlugin* judgment = nullptr;
    std::function<DeliveryState(const SignedEvent&)> submit;
    // Related log events for timeline reconstruction.
    std::function<std::vector<TimelineEntry>(const std::string& identity_id,
                                             const std::set<std::string>& asset_ids, SimTime from,
                                             SimTime to)>
        collect_related;
    // Evidence-graph edges the pipeline declares explicitly.
    std::function<void(const std::string& from_node, const std::string& to_node, Relation rel)>
        link;
    std::function<void(const std::string& task_ref, const std::vector<std::string>& roles)>
        request_approvals;
};

struct SocConfig {
    SimTime window_ms = 5 * 60 * 1000;
    std::size_t burst_threshold = 5;
    SimTime lookback_ms = 10 * 60 * 1000;
    RiskWeights weights;
    TriageConfig triage;
    SimTime d2_cost_ms = 150;
    SimTime g1_cost_ms = 200;
    SimTime g4_cost_ms = 300;
    SimTime l3_cost_ms = 150;
    SimTime a2_cost_ms = 100;
};

struct SocIncident {
    std::string incident_id;
    std::string thread_id;
    Envelope env;
    TriageDecision decision;
    AlertCluster cluster;
    std::string cluster_node;
    std::string assessment_node;
    std::string timeline_node;
    std::set<std::string> open_action_keys;
    std::size_t action_count = 0;
    bool any_action_pending_approval = false;
    bool summarized = false;
    SimTime cluster_emitted_at = 0;
    SimTime opened_at = 0;
};

class SocEngine {
public:
    SocEngine(const SocConfig& config, const AssetInventory& assets, SimClock& clock, IdSource& ids)
        : config_(config), assets_(assets), clock_(clock), ids_(ids) {}

    SocHooks& hooks() { return hooks_; }

    // Feed one alert (already logged by the caller); buffers per identity and
    // schedules window closes on the clock.
    void on_alert(const RawAlert& alert, const std::string& alert_node_uri);

    // Orchestrator resolution callbacks for submitted playbook actions.
    void on_action_resolved(const std::string& idempotency_key, bool acked, SimTime now);

    // Emit the A7 MetricsRecord over everything summarized so far.
    void finalize(SimTime window_start, SimTime window_end, const Envelope& base_env);

    const std::map<std::string, SocIncident>& incidents() const { return incidents_; }
    const std::vector<json>& summaries() const { return summaries_; }
    std::size_t clusters_emitted() const { return clusters_emitted_; }
    const json& incremental_counts() const { return incremental_counts_; }
    const std::vector<JudgmentTrace>& judgment_traces() const { return judgment_traces_; }

private:
    struct IdentityWindow {
        std::vector<RawAlert> alerts;
        std::vector<std::string> alert_nodes;
        SimTime window_start = 0;
        bool open = false;
    };

    void close_window(const std::string& identity_id);
    void open_incident(const AlertCluster& cluster, const std::vector<std::string>& alert_nodes,
                       SimTime cluster_emitted_at);
    void run_playbook(SocIncident& incident, SimTime now);
    void summarize(SocIncident& incident, SimTime now);

    SocConfig config_;
    const AssetInventory& assets_;
    SimClock& clock_;
    IdSource& ids_;
    SocHooks hooks_;
    std::map<std::string, IdentityWindow> windows_;
    std::map<std::string, SocIncident> incidents_;          // by incident id
    std::map<std::string, std::string> action_to_incident_; // idempotency key -> incident id
    std::vector<json> summaries_;
    std::size_t clusters_emitted_ = 0;
    json incremental_counts_ = json::object();
    std::vector<JudgmentTrace> judgment_traces_;
};

}  // namespace aegis
