#include "aegis/soc.hpp"

#include <algorithm>
#include <cmath>

namespace aegis {

const char* alert_source_name(AlertSource s) {
    switch (s) {
        case AlertSource::siem: return "siem";
        case AlertSource::edr: return "edr";
        case AlertSource::idp: return "idp";
    }
    return "siem";
}

const char* alert_type_name(AlertType t) {
    switch (t) {
        case AlertType::login_failure: return "login_failure";
        case AlertType::geo_anomaly: return "geo_anomaly";
        case AlertType::token_misuse: return "token_misuse";
        case AlertType::malware: return "malware";
        case AlertType::other: return "other";
    }
    return "other";
}

AlertSource alert_source_from(const std::string& s) {
    if (s == "siem") return AlertSource::siem;
    if (s == "edr") return AlertSource::edr;
    if (s == "idp") return AlertSource::idp;
    fail(Errc::parse_error, "unknown alert source '" + s + "'");
}

AlertType alert_type_from(const std::string& s) {
    if (s == "login_failure") return AlertType::login_failure;
    if (s == "geo_anomaly") return AlertType::geo_anomaly;
    if (s == "token_misuse") return AlertType::token_misuse;
    if (s == "malware") return AlertType::malware;
    if (s == "other") return AlertType::other;
    fail(Errc::parse_error, "unknown alert type '" + s + "'");
}

json to_json(const RawAlert& a) {
    return json{{"alert_id", a.alert_id},
                {"source", alert_source_name(a.source)},
                {"alert_type", alert_type_name(a.alert_type)},
                {"identity_id", a.identity_id},
                {"asset_id", a.asset_id},
                {"severity", a.severity},
                {"confidence", a.confidence},
                {"observed_at", a.observed_at}};
}

RawAlert raw_alert_from_json(const json& j) {
    RawAlert a;
    a.alert_id = j.at("alert_id").get<std::string>();
    a.source = alert_source_from(j.at("source").get<std::string>());
    a.alert_type = alert_type_from(j.at("alert_type").get<std::string>());
    a.identity_id = j.at("identity_id").get<std::string>();
    a.asset_id = j.at("asset_id").get<std::string>();
    a.severity = j.at("severity").get<double>();
    a.confidence = j.at("confidence").get<double>();
    a.observed_at = j.at("observed_at").get<SimTime>();
    return a;
}

double risk_score(const RiskInputs& x, const RiskWeights& w) {
    return w.w1 * x.severity + w.w2 * x.confidence + w.w3 * x.asset_criticality;
}

json AlertCluster::payload() const {
    return json{{"cluster_id", cluster_id},
                {"alert_ids", alert_ids},
                {"identity_id", identity_id},
                {"window_start", window_start},
                {"window_end", window_end},
                {"risk_score", score},
                {"features", features}};
}

namespace {

AlertCluster build_cluster(const std::vector<RawAlert>& group, const RiskWeights& weights,
                           const AssetInventory& assets, IdSource& ids) {
    AlertCluster c;
    c.cluster_id = ids.fresh("cluster");
    c.identity_id = group.front().identity_id;
    c.window_start = group.front().observed_at;
    c.window_end = group.front().observed_at;
    double max_severity = 0.0, sum_confidence = 0.0, top_criticality = 0.0;
    std::string top_asset;
    std::set<std::string> types;
    std::set<std::string> touched;
    for (const auto& a : group) {
        c.alert_ids.push_back(a.alert_id);
        c.window_start = std::min(c.window_start, a.observed_at);
        c.window_end = std::max(c.window_end, a.observed_at);
        max_severity = std::max(max_severity, a.severity);
        sum_confidence += a.confidence;
        types.insert(alert_type_name(a.alert_type));
        touched.insert(a.asset_id);
        double crit = 0.0;
        if (const auto* asset = assets.find(a.asset_id)) crit = asset->criticality;
        if (crit > top_criticality || (crit == top_criticality && (top_asset.empty() || a.asset_id < top_asset))) {
            top_criticality = crit;
            top_asset = a.asset_id;
        }
    }
    double mean_confidence = sum_confidence / static_cast<double>(group.size());
    c.score = risk_score({max_severity, mean_confidence, top_criticality}, weights);
    c.features = json{{"count", group.size()},
                      {"alert_types", std::vector<std::string>(types.begin(), types.end())},
                      {"assets", std::vector<std::string>(touched.begin(), touched.end())},
                      {"max_severity", max_severity},
                      {"mean_confidence", mean_confidence},
                      {"top_asset", top_asset},
                      {"top_asset_criticality", top_criticality}};
    return c;
}

bool group_qualifies(const std::vector<RawAlert>& group, std::size_t burst_threshold) {
    if (group.size() >= burst_threshold) return true;
    std::set<AlertType> types;
    for (const auto& a : group) types.insert(a.alert_type);
    return types.size() >= 2;
}

}  // namespace

std::vector<AlertCluster> cluster_alerts(std::vector<RawAlert> alerts, SimTime window_ms,
                                         std::size_t burst_threshold, const RiskWeights& weights,
                                         const AssetInventory& assets, IdSource& ids) {
    std::map<std::string, std::vector<RawAlert>> by_identity;
    for (auto& a : alerts) by_identity[a.identity_id].push_back(std::move(a));

    std::vector<AlertCluster> clusters;
    for (auto& [identity, list] : by_identity) {
        std::stable_sort(list.begin(), list.end(), [](const RawAlert& a, const RawAlert& b) {
            if (a.observed_at != b.observed_at) return a.observed_at < b.observed_at;
            return a.alert_id < b.alert_id;
        });
        std::vector<RawAlert> group;
        SimTime group_start = 0;
        auto flush = [&] {
            if (!group.empty() && group_qualifies(group, burst_threshold))
                clusters.push_back(build_cluster(group, weights, assets, ids));
            group.clear();
        };
        for (const auto& a : list) {
            if (group.empty() || a.observed_at - group_start > window_ms) {
                flush();
                group_start = a.observed_at;
            }
            group.push_back(a);
        }
        flush();
    }
    return clusters;
}

const char* severity_band_name(SeverityBand b) {
    switch (b) {
        case SeverityBand::low: return "low";
        case SeverityBand::medium: return "medium";
        case SeverityBand::high: return "high";
    }
    return "low";
}

SeverityBand severity_band(double score, const BandCutpoints& cuts) {
    if (score >= cuts.high_at) return SeverityBand::high;
    if (score >= cuts.medium_at) return SeverityBand::medium;
    return SeverityBand::low;
}

std::optional<TriageDecision> triage(const AlertCluster& cluster, const TriageConfig& config,
                                     const AssetInventory& assets, IdSource& ids, SimTime now) {
    if (!(cluster.score > config.incident_threshold)) return std::nullopt;
    TriageDecision d;
    d.band = severity_band(cluster.score, config.cutpoints);
    d.primary_asset = cluster.features.value("top_asset", "");
    const auto* asset = assets.find(d.primary_asset);
    d.crown_jewel_involved = asset && asset->crown_jewel;
    d.incident_payload = json{{"incident_id", ids.fresh("inc")},
                              {"cluster_ref", cluster.cluster_id},
                              {"identity_id", cluster.identity_id},
                              {"severity_band", severity_band_name(d.band)},
                              {"status", "open"},
                              {"crown_jewel_involved", d.crown_jewel_involved},
                              {"opened_at", now}};
    return d;
}

json timeline_payload(const std::string& incident_ref, std::vector<TimelineEntry> entries) {
    std::stable_sort(entries.begin(), entries.end(), [](const TimelineEntry& a, const TimelineEntry& b) {
        if (a.at != b.at) return a.at < b.at;
        return a.event_ref < b.event_ref;
    });
    json list = json::array();
    for (const auto& e : entries)
        list.push_back(json{{"at", e.at}, {"event_ref", e.event_ref}, {"description", e.description}});
    return json{{"incident_ref", incident_ref}, {"entries", std::move(list)}};
}

std::vector<PlaybookAction> playbook_actions(SeverityBand band, bool crown_jewel) {
    switch (band) {
        case SeverityBand::low:
            return {{"OpenTicket", false}};
        case SeverityBand::medium:
            return {{"RevokeTokens", crown_jewel}, {"ForcePasswordReset", crown_jewel}};
        case SeverityBand::high:
            return {{"RevokeTokens", crown_jewel},
                    {"ForcePasswordReset", crown_jewel},
                    {"OpenTicket", false}};
    }
    return {};
}

json aggregate_metrics(const std::vector<json>& summaries, SimTime window_start,
                       SimTime window_end, IdSource& ids) {
    std::map<std::string, std::size_t> band_counts{{"low", 0}, {"medium", 0}, {"high", 0}};
    std::map<std::string, std::size_t> by_asset;
    double gap_sum = 0.0;
    std::size_t gap_n = 0;
    std::size_t crown_jewel_hits = 0;
    for (const auto& s : summaries) {
        band_counts[s.value("severity_band", "low")] += 1;
        std::string asset = s.value("asset_id", "");
        if (!asset.empty()) by_asset[asset] += 1;
        if (s.value("crown_jewel_involved", false)) ++crown_jewel_hits;
        if (s.contains("opened_at") && s.contains("cluster_emitted_at")) {
            gap_sum += static_cast<double>(s.at("opened_at").get<SimTime>() -
                                           s.at("cluster_emitted_at").get<SimTime>());
            ++gap_n;
        }
    }
    json counts;
    counts["total"] = summaries.size();
    counts["low"] = band_counts["low"];
    counts["medium"] = band_counts["medium"];
    counts["high"] = band_counts["high"];
    counts["crown_jewel_involved"] = crown_jewel_hits;
    counts["by_asset"] = by_asset;

    std::vector<std::pair<std::string, std::size_t>> repeats(by_asset.begin(), by_asset.end());
    std::stable_sort(repeats.begin(), repeats.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    json repeat_assets = json::array();
    for (const auto& [asset, count] : repeats)
        if (count >= 2) repeat_assets.push_back(json{{"asset_id", asset}, {"count", count}});

    return json{{"record_id", ids.fresh("metrics")},
                {"window_start", window_start},
                {"window_end", window_end},
                {"counts", counts},
                {"repeat_assets", repeat_assets},
                {"mean_cluster_to_incident_ms", gap_n == 0 ? 0.0 : gap_sum / static_cast<double>(gap_n)}};
}

// --- engine ------------------------------------------------------------------

void SocEngine::on_alert(const RawAlert& alert, const std::string& alert_node_uri) {
    auto& window = windows_[alert.identity_id];
    if (window.open && alert.observed_at - window.window_start > config_.window_ms)
        close_window(alert.identity_id);  // resets the entry in place
    if (!window.open) {
        window.open = true;
        window.window_start = alert.observed_at;
        window.alerts.clear();
        window.alert_nodes.clear();
        std::string identity = alert.identity_id;
        // The window closes window_ms after its first alert.
        clock_.schedule(window.window_start + config_.window_ms + 1,
                        [this, identity] { close_window(identity); });
    }
    window.alerts.push_back(alert);
    window.alert_nodes.push_back(alert_node_uri);
}

void SocEngine::close_window(const std::string& identity_id) {
    auto it = windows_.find(identity_id);
    if (it == windows_.end() || !it->second.open) return;
    IdentityWindow window = std::move(it->second);
    it->second = IdentityWindow{};

    std::vector<RawAlert> group = window.alerts;
    if (group.empty()) return;
    if (!group_qualifies(group, config_.burst_threshold)) return;

    AlertCluster cluster = build_cluster(group, config_.weights, assets_, ids_);
    // Each cluster starts its own thread; the incident and every downstream
    // artifact inherit it, so the whole chain is one query_thread result.
    ++clusters_emitted_;
    clock_.schedule_in(config_.d2_cost_ms, [this, cluster, nodes = window.alert_nodes] {
        open_incident(cluster, nodes, clock_.now());
    });
}

void SocEngine::open_incident(const AlertCluster& cluster,
                              const std::vector<std::string>& alert_nodes,
                              SimTime cluster_emitted_at) {
    // D2 emits the cluster under a fresh per-cluster thread.
    Envelope d2_env;
    d2_env.mission_id = "mission-soc-operations";
    d2_env.thread_id = "thread-" + cluster.cluster_id;
    d2_env.task_id = ids_.fresh("task");
    d2_env.role = "SiemAnalystAgent";
    d2_env.intent = "cluster_alerts";
    d2_env.policy_refs = {{"IR-Policy-v3", ""}, {"Detection-Policy-v1", ""}};
    d2_env.classification = Classification::internal_plus_sensitive;
    d2_env.decision_basis.evidence_refs = alert_nodes;
    d2_env.decision_basis.confidence = cluster.features.value("mean_confidence", 0.0);

    // Non-load-bearing natural-language summary via the bounded judgment
    // plugin; a post-check failure just drops the summary, the trace stays.
    AlertCluster annotated = cluster;
    if (hooks_.judgment) {
        json request{{"kind", "summarize_cluster"},
                     {"alert_count", cluster.alert_ids.size()},
                     {"identity_id", cluster.identity_id}};
        JudgmentExpectation expect;
        expect.required_fields = {"text"};
        expect.max_text_chars = 256;
        try {
            json response = judge(*hooks_.judgment, request, expect, judgment_traces_);
            annotated.features["summary"] = response["text"];
            d2_env.decision_basis.explanation_ref =
                "uri://judgment/" + judgment_traces_.back().response_digest;
        } catch (const Error& e) {
            if (e.code() != Errc::postcheck_failure) throw;
        }
    }

    SignedEvent cluster_ev =
        hooks_.emit("D2", "AlertCluster", annotated.payload(), d2_env, 0.8, alert_nodes);
    std::string cluster_node = event_node_uri(cluster_ev.trace_id);

    auto decision = triage(cluster, config_.triage, assets_, ids_, clock_.now());
    if (!decision) return;

    SimTime opened_at = clock_.now() + config_.g1_cost_ms;
    std::string incident_id = decision->incident_payload.at("incident_id").get<std::string>();
    decision->incident_payload["opened_at"] = opened_at;

    clock_.schedule_in(config_.g1_cost_ms, [this, cluster, cluster_node, cluster_emitted_at,
                                            decision = *decision, d2_env, incident_id] {
        SimTime now = clock_.now();
        Envelope g1_env = child_envelope(d2_env, "IncidentTriageAgent", "triage_cluster", ids_);
        g1_env.decision_basis.evidence_refs = {cluster_node};

        // Decision artifact for the actions this incident will trigger.
        json assessment{{"assessment_id", ids_.fresh("assess")},
                        {"subject_kind", "incident"},
                        {"subject_ref", incident_id},
                        {"risk_score", cluster.score},
                        {"rationale", "cluster risk above incident threshold"},
                        {"assessed_at", now}};
        SignedEvent assess_ev =
            hooks_.emit("G1", "RiskAssessment", assessment, g1_env, 0.85, {cluster_node});
        std::string assessment_node = event_node_uri(assess_ev.trace_id);

        SignedEvent incident_ev = hooks_.emit("G1", "IncidentCase", decision.incident_payload,
                                              g1_env, 0.85, {cluster_node, assessment_node});
        std::string incident_node = event_node_uri(incident_ev.trace_id);
        if (hooks_.link) {
            hooks_.link(incident_node, cluster_node, Relation::derived_from);
            hooks_.link(assessment_node, cluster_node, Relation::derived_from);
        }

        SocIncident incident;
        incident.incident_id = incident_id;
        incident.thread_id = g1_env.thread_id;
        incident.env = g1_env;
        incident.decision = decision;
        incident.cluster = cluster;
        incident.cluster_node = cluster_node;
        incident.assessment_node = assessment_node;
        incident.cluster_emitted_at = cluster_emitted_at;
        incident.opened_at = now;
        auto& stored = incidents_.emplace(incident_id, std::move(incident)).first->second;

        // G4 timeline reconstruction, spawned in the same thread.
        clock_.schedule_in(config_.g4_cost_ms, [this, &stored, incident_node] {
            SimTime now = clock_.now();
            Envelope g4_env =
                child_envelope(stored.env, "ForensicAnalysisAgent", "reconstruct_timeline", ids_);
            g4_env.decision_basis.evidence_refs = {stored.cluster_node};
            std::set<std::string> assets;
            if (stored.cluster.features.contains("assets"))
                for (const auto& a : stored.cluster.features["assets"])
                    assets.insert(a.get<std::string>());
            std::vector<TimelineEntry> entries;
            if (hooks_.collect_related)
                entries = hooks_.collect_related(stored.cluster.identity_id, assets,
                                                 stored.cluster.window_start - config_.lookback_ms,
                                                 now);
            json payload = timeline_payload(stored.incident_id, std::move(entries));
            SignedEvent timeline_ev = hooks_.emit("G4", "IncidentTimeline", payload, g4_env, 0.9,
                                                  {stored.cluster_node, stored.assessment_node});
            stored.timeline_node = event_node_uri(timeline_ev.trace_id);
            if (hooks_.link) {
                hooks_.link(stored.timeline_node, stored.cluster_node, Relation::derived_from);
                hooks_.link(stored.timeline_node, incident_node, Relation::part_of_thread);
            }

            clock_.schedule_in(config_.l3_cost_ms,
                               [this, &stored] { run_playbook(stored, clock_.now()); });
        });
    });
}

void SocEngine::run_playbook(SocIncident& incident, SimTime now) {
    Envelope l3_env = child_envelope(incident.env, "SoarOrchestrationAgent", "route_playbook", ids_);
    l3_env.decision_basis.evidence_refs = {incident.cluster_node, incident.assessment_node};
    if (!incident.timeline_node.empty())
        l3_env.decision_basis.evidence_refs.push_back(incident.timeline_node);

    auto actions = playbook_actions(incident.decision.band, incident.decision.crown_jewel_involved);
    incident.action_count = actions.size();

    for (const auto& action : actions) {
        if (action.oc_type == "OpenTicket") {
            json ticket{{"ticket_id", ids_.fresh("ticket")},
                        {"subject_kind", "incident"},
                        {"subject_ref", incident.incident_id},
                        {"summary", "incident follow-up"},
                        {"severity", severity_band_name(incident.decision.band)}};
            hooks_.emit("L3", "OpenTicket", ticket, l3_env, 0.9,
                        l3_env.decision_basis.evidence_refs);
            continue;
        }
        Envelope action_env = l3_env;
        std::vector<std::string> cosign_roles;
        if (action.requires_cosign) {
            cosign_roles.push_back("IR.Manager");
            const auto* asset = assets_.find(incident.decision.primary_asset);
            if (asset)
                for (const auto& r : asset->owner_roles) cosign_roles.push_back(r);
            action_env.constraints.push_back(Constraint::cosign(cosign_roles));
        }
        json payload{{"action_id", ids_.fresh("act")},
                     {"identity_id", incident.cluster.identity_id},
                     {"asset_id", incident.decision.primary_asset},
                     {"incident_ref", incident.incident_id},
                     {"reason", "playbook:" + std::string(severity_band_name(incident.decision.band))}};
        SignedEvent ev = hooks_.emit("L3", action.oc_type, payload, action_env, 0.9,
                                     action_env.decision_basis.evidence_refs);
        DeliveryState st = hooks_.submit(ev);
        action_to_incident_[ev.idempotency_key] = incident.incident_id;
        incident.open_action_keys.insert(ev.idempotency_key);
        if (st.status == DeliveryStatus::pending_approval) {
            incident.any_action_pending_approval = true;
            if (hooks_.request_approvals) hooks_.request_approvals(st.pending_id, cosign_roles);
        }
    }
    if (incident.open_action_keys.empty()) summarize(incident, now);
}

void SocEngine::on_action_resolved(const std::string& idempotency_key, bool acked, SimTime now) {
    (void)acked;
    auto it = action_to_incident_.find(idempotency_key);
    if (it == action_to_incident_.end()) return;
    auto inc_it = incidents_.find(it->second);
    if (inc_it == incidents_.end()) return;
    SocIncident& incident = inc_it->second;
    incident.open_action_keys.erase(idempotency_key);
    if (incident.open_action_keys.empty() && !incident.summarized) summarize(incident, now);
}

void SocEngine::summarize(SocIncident& incident, SimTime now) {
    incident.summarized = true;
    std::string outcome = incident.action_count == 0 || incident.decision.band == SeverityBand::low
                              ? "ticket_only"
                              : (incident.any_action_pending_approval ? "approved_contained"
                                                                      : "auto_contained");
    json summary{{"incident_ref", incident.incident_id},
                 {"severity_band", severity_band_name(incident.decision.band)},
                 {"crown_jewel_involved", incident.decision.crown_jewel_involved},
                 {"asset_id", incident.decision.primary_asset},
                 {"action_count", incident.action_count},
                 {"outcome", outcome},
                 {"cluster_emitted_at", incident.cluster_emitted_at},
                 {"opened_at", incident.opened_at},
                 {"closed_at", now}};
    Envelope g1_env = child_envelope(incident.env, "IncidentTriageAgent", "summarize_incident", ids_);
    g1_env.decision_basis.evidence_refs = {incident.cluster_node, incident.assessment_node};
    SignedEvent summary_ev = hooks_.emit("G1", "IncidentSummary", summary, g1_env, 0.9,
                                         g1_env.decision_basis.evidence_refs);
    summaries_.push_back(summary);

    // Incremental A7 aggregate, checked against batch recomputation in tests.
    std::string band = severity_band_name(incident.decision.band);
    incremental_counts_[band] = incremental_counts_.value(band, 0) + 1;
    incremental_counts_["total"] = incremental_counts_.value("total", 0) + 1;

    // A2 risk roll-up over the summary.
    std::string summary_node = event_node_uri(summary_ev.trace_id);
    clock_.schedule_in(config_.a2_cost_ms, [this, summary_node, env = incident.env,
                                            incident_id = incident.incident_id,
                                            score = incident.cluster.score] {
        Envelope a2_env = child_envelope(env, "RiskAnalysisAgent", "update_risk_metrics", ids_);
        a2_env.decision_basis.evidence_refs = {summary_node};
        json assessment{{"assessment_id", ids_.fresh("assess")},
                        {"subject_kind", "incident"},
                        {"subject_ref", incident_id},
                        {"risk_score", score},
                        {"rationale", "post-incident risk roll-up"},
                        {"assessed_at", clock_.now()}};
        hooks_.emit("A2", "RiskAssessment", assessment, a2_env, 0.85, {summary_node});
    });
}

void SocEngine::finalize(SimTime window_start, SimTime window_end, const Envelope& base_env) {
    json metrics = aggregate_metrics(summaries_, window_start, window_end, ids_);
    Envelope a7_env = base_env;
    a7_env.task_id = ids_.fresh("task");
    a7_env.role = "MetricsAggregatorAgent";
    a7_env.intent = "aggregate_metrics";
    hooks_.emit("A7", "MetricsRecord", metrics, a7_env, 0.95,
                base_env.decision_basis.evidence_refs);
}

}  // namespace aegis
