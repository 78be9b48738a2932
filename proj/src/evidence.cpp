#include "aegis/evidence.hpp"

#include <algorithm>
#include <deque>

#include "aegis/sha256.hpp"

namespace aegis {

const char* node_kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::policy_bundle: return "PolicyBundle";
        case NodeKind::risk_assessment: return "RiskAssessment";
        case NodeKind::compliance_gap: return "ComplianceGap";
        case NodeKind::evidence_manifest: return "EvidenceManifest";
        case NodeKind::incident_case: return "IncidentCase";
        case NodeKind::incident_timeline: return "IncidentTimeline";
        case NodeKind::incident_summary: return "IncidentSummary";
        case NodeKind::alert_cluster: return "AlertCluster";
        case NodeKind::anomaly_report: return "AnomalyReport";
        case NodeKind::behavioral_risk: return "BehavioralRisk";
        case NodeKind::hunt_finding: return "HuntFinding";
        case NodeKind::scim_mutation: return "SCIMMutation";
        case NodeKind::access_change_event: return "AccessChangeEvent";
        case NodeKind::sod_violation: return "SoDViolation";
        case NodeKind::hardening_recommendation: return "HardeningRecommendation";
        case NodeKind::model_validation_report: return "ModelValidationReport";
        case NodeKind::metrics_record: return "MetricsRecord";
        case NodeKind::asset_record: return "AssetRecord";
        case NodeKind::other: return "Other";
    }
    return "Other";
}

NodeKind node_kind_from(const std::string& s) {
    static const std::map<std::string, NodeKind> lut = {
        {"PolicyBundle", NodeKind::policy_bundle},
        {"RiskAssessment", NodeKind::risk_assessment},
        {"ComplianceGap", NodeKind::compliance_gap},
        {"EvidenceManifest", NodeKind::evidence_manifest},
        {"IncidentCase", NodeKind::incident_case},
        {"IncidentTimeline", NodeKind::incident_timeline},
        {"IncidentSummary", NodeKind::incident_summary},
        {"AlertCluster", NodeKind::alert_cluster},
        {"AnomalyReport", NodeKind::anomaly_report},
        {"BehavioralRisk", NodeKind::behavioral_risk},
        {"HuntFinding", NodeKind::hunt_finding},
        {"SCIMMutation", NodeKind::scim_mutation},
        {"AccessChangeEvent", NodeKind::access_change_event},
        {"SoDViolation", NodeKind::sod_violation},
        {"HardeningRecommendation", NodeKind::hardening_recommendation},
        {"ModelValidationReport", NodeKind::model_validation_report},
        {"MetricsRecord", NodeKind::metrics_record},
        {"AssetRecord", NodeKind::asset_record},
    };
    auto it = lut.find(s);
    return it == lut.end() ? NodeKind::other : it->second;
}

NodeKind node_kind_for_oc_type(const std::string& oc_type) { return node_kind_from(oc_type); }

const char* relation_name(Relation r) {
    switch (r) {
        case Relation::justified_by: return "justified_by";
        case Relation::governed_by: return "governed_by";
        case Relation::derived_from: return "derived_from";
        case Relation::approved_by: return "approved_by";
        case Relation::part_of_thread: return "part_of_thread";
        case Relation::affects_asset: return "affects_asset";
    }
    return "derived_from";
}

Relation relation_from(const std::string& s) {
    if (s == "justified_by") return Relation::justified_by;
    if (s == "governed_by") return Relation::governed_by;
    if (s == "derived_from") return Relation::derived_from;
    if (s == "approved_by") return Relation::approved_by;
    if (s == "part_of_thread") return Relation::part_of_thread;
    if (s == "affects_asset") return Relation::affects_asset;
    fail(Errc::parse_error, "unknown relation '" + s + "'");
}

std::string event_node_uri(const std::string& trace_id) { return "uri://evt/" + trace_id; }
std::string policy_node_uri(const std::string& policy_id) { return "uri://policy/" + policy_id; }
std::string asset_node_uri(const std::string& asset_id) { return "uri://asset/" + asset_id; }

void AssetInventory::put(AssetRecord record) {
    if (record.criticality < 0.0 || record.criticality > 1.0)
        fail(Errc::config_error, "asset " + record.asset_id + ": criticality out of [0,1]");
    assets_[record.asset_id] = std::move(record);
}

const AssetRecord* AssetInventory::find(const std::string& asset_id) const {
    auto it = assets_.find(asset_id);
    return it == assets_.end() ? nullptr : &it->second;
}

json AssetInventory::export_json() const {
    json arr = json::array();
    for (const auto& [id, a] : assets_) {
        arr.push_back(json{{"asset_id", a.asset_id},
                           {"name", a.name},
                           {"criticality", a.criticality},
                           {"crown_jewel", a.crown_jewel},
                           {"owner_roles", a.owner_roles}});
    }
    return arr;
}

AssetInventory AssetInventory::import_json(const json& j) {
    AssetInventory inv;
    for (const auto& e : j) {
        AssetRecord a;
        a.asset_id = e.at("asset_id").get<std::string>();
        a.name = e.at("name").get<std::string>();
        a.criticality = e.at("criticality").get<double>();
        a.crown_jewel = e.at("crown_jewel").get<bool>();
        a.owner_roles = e.at("owner_roles").get<std::vector<std::string>>();
        inv.put(std::move(a));
    }
    return inv;
}

const std::string& EvidenceGraph::put_node(EvidenceNode node) {
    if (node.node_id.empty()) fail(Errc::empty_identifier, "node_id empty");
    auto [it, inserted] = nodes_.emplace(node.node_id, std::move(node));
    if (!inserted) fail(Errc::duplicate_node, it->first);
    insertion_order_.push_back(it->first);
    return it->first;
}

bool EvidenceGraph::has_node(const std::string& node_id) const { return nodes_.count(node_id) > 0; }

const EvidenceNode* EvidenceGraph::find_node(const std::string& node_id) const {
    auto it = nodes_.find(node_id);
    return it == nodes_.end() ? nullptr : &it->second;
}

EvidenceEdge EvidenceGraph::link(const std::string& from, const std::string& to,
                                 Relation relation) {
    if (!has_node(from)) fail(Errc::unknown_node, from);
    if (!has_node(to)) fail(Errc::unknown_node, to);
    EvidenceEdge edge{from, to, relation};
    auto [it, inserted] = edges_.insert(edge);
    if (inserted) out_edges_[from].push_back(&*it);
    return edge;
}

TraceResult EvidenceGraph::trace_action(const std::string& action_node_id) const {
    return trace_action(action_node_id, {});
}

TraceResult EvidenceGraph::trace_action(const std::string& action_node_id,
                                        std::span<const PolicyRef> envelope_policy_refs) const {
    if (!has_node(action_node_id)) fail(Errc::unknown_node, action_node_id);
    TraceResult result;

    auto out_it = out_edges_.find(action_node_id);
    if (out_it != out_edges_.end()) {
        for (const auto* e : out_it->second) {
            if (e->relation != Relation::governed_by) continue;
            const auto* n = find_node(e->to);
            if (n && n->kind == NodeKind::policy_bundle) {
                result.policies.insert(e->to);
                result.policies_from_edges.insert(e->to);
            }
        }
    }
    for (const auto& ref : envelope_policy_refs) {
        std::string uri = policy_node_uri(ref.policy_id);
        const auto* n = find_node(uri);
        if (n && n->kind == NodeKind::policy_bundle) {
            result.policies.insert(uri);
            result.policies_from_envelope.insert(uri);
        }
    }

    // Breadth-first closure over justified_by / derived_from, bounded so
    // cycles from lenient foreign-log ingestion still terminate.
    std::deque<std::pair<std::string, int>> frontier{{action_node_id, 0}};
    std::set<std::string> seen{action_node_id};
    while (!frontier.empty()) {
        auto [id, depth] = frontier.front();
        frontier.pop_front();
        if (depth >= closure_depth_) continue;
        auto it = out_edges_.find(id);
        if (it == out_edges_.end()) continue;
        for (const auto* e : it->second) {
            if (e->relation != Relation::justified_by && e->relation != Relation::derived_from)
                continue;
            if (!seen.insert(e->to).second) continue;
            result.evidence.insert(e->to);
            frontier.emplace_back(e->to, depth + 1);
        }
    }
    return result;
}

std::vector<std::string> EvidenceGraph::query_thread(const std::string& thread_id) const {
    std::vector<const EvidenceNode*> matches;
    for (const auto& id : insertion_order_) {
        const auto& n = nodes_.at(id);
        if (n.thread_id == thread_id) matches.push_back(&n);
    }
    std::stable_sort(matches.begin(), matches.end(), [](const auto* a, const auto* b) {
        if (a->created_at != b->created_at) return a->created_at < b->created_at;
        return a->node_id < b->node_id;
    });
    std::vector<std::string> out;
    out.reserve(matches.size());
    for (const auto* n : matches) out.push_back(n->node_id);
    return out;
}

json EvidenceGraph::export_graph() const {
    json j;
    j["nodes"] = json::array();
    for (const auto& id : insertion_order_) {
        const auto& n = nodes_.at(id);
        json e{{"node_id", n.node_id},
               {"kind", n.kind == NodeKind::other && !n.kind_name.empty() ? n.kind_name
                                                                          : node_kind_name(n.kind)},
               {"payload_ref", n.payload_ref},
               {"created_at", n.created_at},
               {"producer", n.producer},
               {"thread_id", n.thread_id}};
        j["nodes"].push_back(std::move(e));
    }
    j["edges"] = json::array();
    for (const auto& e : edges_) {
        j["edges"].push_back(
            json{{"from", e.from}, {"to", e.to}, {"relation", relation_name(e.relation)}});
    }
    return j;
}

EvidenceGraph EvidenceGraph::import_graph(const json& j) {
    EvidenceGraph g;
    for (const auto& e : j.at("nodes")) {
        EvidenceNode n;
        n.node_id = e.at("node_id").get<std::string>();
        std::string kind = e.at("kind").get<std::string>();
        n.kind = node_kind_from(kind);
        if (n.kind == NodeKind::other) n.kind_name = kind;
        n.payload_ref = e.at("payload_ref").get<std::string>();
        n.created_at = e.at("created_at").get<SimTime>();
        n.producer = e.at("producer").get<std::string>();
        n.thread_id = e.at("thread_id").get<std::string>();
        g.put_node(std::move(n));
    }
    for (const auto& e : j.at("edges")) {
        g.link(e.at("from").get<std::string>(), e.at("to").get<std::string>(),
               relation_from(e.at("relation").get<std::string>()));
    }
    return g;
}

std::string EvidenceGraph::content_hash() const { return sha256_hex(export_graph().dump()); }

}  // namespace aegis
