#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aegis/common.hpp"
#include "aegis/envelope.hpp"

namespace aegis {

// ---------------------------------------------------------------------------
// Append-only typed store of evidence nodes and relations; answers the
// traceability queries the ecosystem invariants require.
// ---------------------------------------------------------------------------

enum class NodeKind {
    policy_bundle,
    risk_assessment,
    compliance_gap,
    evidence_manifest,
    incident_case,
    incident_timeline,
    incident_summary,
    alert_cluster,
    anomaly_report,
    behavioral_risk,
    hunt_finding,
    scim_mutation,
    access_change_event,
    sod_violation,
    hardening_recommendation,
    model_validation_report,
    metrics_record,
    asset_record,
    other,
};

const char* node_kind_name(NodeKind k);
NodeKind node_kind_from(const std::string& s);

// Maps an oc_type to its node kind; unknown contract names become `other`
// with the oc_type preserved in kind_name.
NodeKind node_kind_for_oc_type(const std::string& oc_type);

struct EvidenceNode {
    std::string node_id;  // URI
    NodeKind kind = NodeKind::other;
    std::string kind_name;  // set when kind == other
    std::string payload_ref;
    SimTime created_at = 0;
    std::string producer;
    std::string thread_id;
};

enum class Relation {
    justified_by,
    governed_by,
    derived_from,
    approved_by,
    part_of_thread,
    affects_asset,
};

const char* relation_name(Relation r);
Relation relation_from(const std::string& s);

struct EvidenceEdge {
    std::string from;
    std::string to;
    Relation relation = Relation::derived_from;

    auto operator<=>(const EvidenceEdge&) const = default;
};

struct TraceResult {
    std::set<std::string> policies;
    std::set<std::string> evidence;
    std::set<std::string> policies_from_edges;     // satisfied via governed_by
    std::set<std::string> policies_from_envelope;  // satisfied via policy_refs
};

// Node URI conventions shared across the kernel.
std::string event_node_uri(const std::string& trace_id);
std::string policy_node_uri(const std::string& policy_id);
std::string asset_node_uri(const std::string& asset_id);

struct AssetRecord {
    std::string asset_id;
    std::string name;
    double criticality = 0.0;
    bool crown_jewel = false;
    std::vector<std::string> owner_roles;
};

class AssetInventory {
public:
    void put(AssetRecord record);
    const AssetRecord* find(const std::string& asset_id) const;
    std::size_t size() const { return assets_.size(); }
    const std::map<std::string, AssetRecord>& all() const { return assets_; }

    json export_json() const;
    static AssetInventory import_json(const json& j);

private:
    std::map<std::string, AssetRecord> assets_;
};

class EvidenceGraph {
public:
    // Throws DuplicateNode.
    const std::string& put_node(EvidenceNode node);

    bool has_node(const std::string& node_id) const;
    const EvidenceNode* find_node(const std::string& node_id) const;

    // Idempotent; throws UnknownNode if either endpoint is missing.
    EvidenceEdge link(const std::string& from, const std::string& to, Relation relation);

    // policies: governed_by targets of kind policy_bundle (1 hop), unioned
    // with resolvable envelope policy_refs when provided. evidence:
    // justified_by/derived_from closure, depth-bounded.
    TraceResult trace_action(const std::string& action_node_id) const;
    TraceResult trace_action(const std::string& action_node_id,
                             std::span<const PolicyRef> envelope_policy_refs) const;

    std::vector<std::string> query_thread(const std::string& thread_id) const;

    json export_graph() const;
    static EvidenceGraph import_graph(const json& j);

    std::size_t node_count() const { return insertion_order_.size(); }
    std::size_t edge_count() const { return edges_.size(); }

    // sha256 over the canonical export; append-only checks compare prefixes.
    std::string content_hash() const;

    void set_closure_depth(int depth) { closure_depth_ = depth; }
    int closure_depth() const { return closure_depth_; }

private:
    std::map<std::string, EvidenceNode> nodes_;
    std::vector<std::string> insertion_order_;
    std::set<EvidenceEdge> edges_;
    std::map<std::string, std::vector<const EvidenceEdge*>> out_edges_;
    int closure_depth_ = 8;
};

}  // namespace aegis
