#pragma once

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "aegis/common.hpp"
#include "aegis/contracts.hpp"

namespace aegis {

// ---------------------------------------------------------------------------
// Executes agents as pure functions over (input event, envelope), enforces
// the deterministic-first discipline via a pluggable judgment interface with
// post-checks, and applies lifecycle/rollback criteria.
// ---------------------------------------------------------------------------

enum class Lifecycle { dev, canary, production, rolled_back };

const char* lifecycle_name(Lifecycle l);

struct AgentSpec {
    std::string agent_code;  // matches [A-L][0-9]+
    char domain = 'A';
    std::string role_name;
    std::set<std::string> input_schemas;
    std::set<std::string> output_schemas;
    std::string identity;  // spiffe uri
    Lifecycle lifecycle = Lifecycle::production;
    // Deterministic simulated cost per invocation; the timebox constraint
    // compares against it.
    SimTime cost_ms = 100;
};

struct JudgmentTrace {
    std::string request_digest;
    std::string response_digest;
    std::vector<std::pair<std::string, bool>> post_checks;
    bool used = false;
};

struct InvocationResult {
    std::vector<SignedEvent> outputs;
    Envelope updated_envelope;
    std::vector<JudgmentTrace> judgment_calls;
    SimTime duration_ms = 0;
};

class JudgmentPlugin {
public:
    virtual ~JudgmentPlugin() = default;
    virtual json respond(const json& request) = 0;
};

// Deterministic template responder: never calls out, fills fixed shapes.
class TemplateJudgment : public JudgmentPlugin {
public:
    json respond(const json& request) override;
};

struct NumericBound {
    std::string field;
    double min_value;
    double max_value;
};

struct JudgmentExpectation {
    std::vector<std::string> required_fields;
    std::size_t max_text_chars = 512;
    std::vector<NumericBound> bounds;
};

// Runs the plugin and applies post-checks; on any failure the response is
// discarded, the trace is retained with used=false, and PostCheckFailure is
// thrown. The trace is appended to `traces` either way.
json judge(JudgmentPlugin& plugin, const json& request, const JudgmentExpectation& expect,
           std::vector<JudgmentTrace>& traces);

// Agent body contract: read the input, emit zero or more (oc_type, payload)
// proposals. The runtime validates, signs, and stamps them.
struct AgentContext {
    const SignedEvent& input;
    const Envelope& env;
    SimTime now;
    JudgmentPlugin* judgment = nullptr;
    std::vector<std::pair<std::string, json>> proposals;
    std::vector<JudgmentTrace> traces;
    double confidence = 0.0;
    std::vector<std::string> extra_evidence_refs;

    void emit(const std::string& oc_type, json payload) {
        proposals.emplace_back(oc_type, std::move(payload));
    }
};

using AgentFn = std::function<void(AgentContext&)>;

class AgentRuntime {
public:
    AgentRuntime(const SchemaRegistry& schemas, const IdentityRegistry& identities,
                 EventSigner& signer)
        : schemas_(schemas), identities_(identities), signer_(signer) {}

    void set_judgment(JudgmentPlugin* plugin) { judgment_ = plugin; }

    // Throws SchemaMismatch, LifecycleBlocked, VerificationFailed,
    // ReadOnlyViolation, TimeboxExceeded, PostCheckFailure. On throw nothing
    // is persisted.
    InvocationResult invoke(const AgentSpec& spec, const AgentFn& fn, const SignedEvent& input,
                            const Envelope& env, SimTime now) const;

private:
    const SchemaRegistry& schemas_;
    const IdentityRegistry& identities_;
    EventSigner& signer_;
    JudgmentPlugin* judgment_ = nullptr;
};

struct AgentSLO {
    SimTime ack_p95_ms = 0;
    double false_alert_rate = 0.0;
    double coverage = 0.0;
    SimTime window_ms = 0;
};

struct RollbackPolicy {
    double max_false_alert_rate = 0.2;
    SimTime max_ack_p95_ms = 60'000;
    double max_override_rate = 0.3;
    bool require_valid_attestation = true;
};

// Nearest-rank p95 over agent_ack latencies; rates from disposition records.
// Throws EmptyWindow when the agent has no applicable events in the window.
AgentSLO evaluate_slos(const std::string& agent_code, const std::vector<SignedEvent>& event_log,
                       SimTime window_start, SimTime window_end);

struct LifecycleDecision {
    Lifecycle lifecycle;
    bool rolled_back = false;
    std::vector<std::string> reasons;
};

LifecycleDecision apply_rollback_criteria(const AgentSpec& spec, const AgentSLO& slo,
                                          const RollbackPolicy& policy, double override_rate,
                                          bool provenance_ok);

// Nearest-rank percentile: value at index ceil(q * n) of the ascending sort.
SimTime nearest_rank_percentile(std::vector<SimTime> values, double q);

}  // namespace aegis
