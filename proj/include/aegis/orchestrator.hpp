#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aegis/contracts.hpp"
#include "aegis/simclock.hpp"

namespace aegis {

// ---------------------------------------------------------------------------
// Routes events to agents by rule, gates cosign-required actions, and
// delivers state-changing events with exactly-once, per-key-ordered,
// backoff-retried semantics.
// ---------------------------------------------------------------------------

struct RoutingRule {
    std::string rule_id;
    int priority = 0;
    // Absent criteria match anything; policy_ref matches when the envelope
    // carries that policy id.
    std::optional<std::string> oc_type;
    std::optional<std::string> intent;
    std::optional<std::string> mission_id;
    std::optional<std::string> policy_ref;
    std::string target_agent;
    std::vector<Constraint> required_constraints;

    bool matches(const SignedEvent& ev) const;
};

json to_json(const RoutingRule& rule);
RoutingRule routing_rule_from_json(const json& j);

struct Dispatch {
    std::string target_agent;
    Envelope child_env;
    std::string rule_id;
};

enum class DeliveryStatus { pending_approval, queued, in_flight, acked, failed_permanent };

const char* delivery_status_name(DeliveryStatus s);

struct BackoffPolicy {
    SimTime base_ms = 1000;
    double factor = 2.0;
    SimTime cap_ms = 60'000;
    int max_retries = 5;

    // delay(k) = min(base * factor^k, cap) for attempt k >= 0.
    SimTime delay(int k) const;
};

struct DeliveryState {
    std::string idempotency_key;
    DeliveryStatus status = DeliveryStatus::queued;
    int attempts = 0;
    SimTime next_retry_at = 0;
    std::string ordering_scope;
    std::string pending_id;   // set while pending_approval
    std::string fail_reason;  // set on failed_permanent
};

struct PendingAction {
    std::string pending_id;
    SignedEvent event;  // original, producer signature intact
    std::vector<std::string> required_roles;
    Envelope env;  // accumulates approvals
    SimTime created_at = 0;
    SimTime expires_at = kNever;
    bool releasing = false;  // covering approval recorded, release scheduled
};

struct EndpointResult {
    int status = 200;
    SimTime latency_ms = 0;
};

struct DeliveryRecordData {
    std::string record_kind;
    std::string subject_key;
    std::string subject_oc_type;
    std::string target_system;
    int attempt = -1;
    int status_code = 0;
    std::string detail;
    SimTime at = 0;
};

struct OrchestratorHooks {
    // Request delivery of canonical event bytes; target_system comes from
    // the payload (empty when the schema has none). `rollback` marks
    // remediation/rollback mutations for the endpoint's failure model.
    std::function<EndpointResult(const std::string& target_system, const SignedEvent& ev)>
        endpoint;
    // Every state transition, for the log.
    std::function<void(const DeliveryRecordData&)> record;
    // The event is now queued and visible: append it to the event log.
    std::function<void(const SignedEvent&)> on_queued;
    std::function<void(const SignedEvent&)> on_acked;
    std::function<void(const SignedEvent&, const std::string& reason)> on_failed;
    // Re-sign a released action under the orchestrator identity with the
    // updated (approved) envelope and a fresh emitted_at.
    std::function<SignedEvent(const SignedEvent& original, const Envelope& updated)> release_sign;
    // Approval evidence, linked approved_by once the release exists.
    std::function<void(const SignedEvent& original, const Approval&)> on_approval;
};

class Orchestrator {
public:
    Orchestrator(SimClock& clock, const SchemaRegistry& schemas,
                 const IdentityRegistry& identities, IdSource& ids)
        : clock_(clock), schemas_(schemas), identities_(identities), ids_(ids) {}

    void set_rules(std::vector<RoutingRule> rules);
    void set_backoff(BackoffPolicy policy) { backoff_ = policy; }
    const BackoffPolicy& backoff() const { return backoff_; }
    void set_approval_timebox(SimTime ms) { approval_timebox_ms_ = ms; }
    OrchestratorHooks& hooks() { return hooks_; }

    // Highest-priority matching rule wins; ties break by declaration order.
    // No match -> dead-letter record, std::nullopt. Throws
    // VerificationFailed when the event does not verify.
    std::optional<Dispatch> route(const SignedEvent& ev);

    // State-changing events only. Unsatisfied policy_cosign -> pending;
    // otherwise queued. Duplicate idempotency keys return the existing
    // state untouched.
    DeliveryState submit(const SignedEvent& ev, SimTime now);

    // Throws UnknownPending / WrongRole / BadApprovalSignature.
    DeliveryState approve(const std::string& pending_id, const Approval& approval, SimTime now);

    const DeliveryState* find_delivery(const std::string& idempotency_key) const;
    const PendingAction* find_pending(const std::string& pending_id) const;
    std::vector<const DeliveryState*> deliveries() const;
    const std::vector<SignedEvent>& dead_letters() const { return dead_letters_; }
    std::size_t pending_count() const { return pending_.size(); }

private:
    void enqueue(const std::string& key, SimTime now);
    void start_next_in_scope(const std::string& scope, SimTime now);
    void attempt(const std::string& key);
    void emit_record(const std::string& kind, const DeliveryState& st, const SignedEvent& ev,
                     int status_code, const std::string& detail, SimTime at);
    std::string ordering_scope_for(const SignedEvent& ev) const;

    SimClock& clock_;
    const SchemaRegistry& schemas_;
    const IdentityRegistry& identities_;
    IdSource& ids_;
    std::vector<RoutingRule> rules_;
    BackoffPolicy backoff_;
    SimTime approval_timebox_ms_ = 24LL * 3600 * 1000;
    OrchestratorHooks hooks_;

    std::map<std::string, DeliveryState> states_;       // by submitted idempotency key
    std::map<std::string, SignedEvent> queued_events_;  // event actually delivered, by key
    std::map<std::string, PendingAction> pending_;      // by pending id
    std::map<std::string, std::deque<std::string>> scope_queues_;
    std::map<std::string, bool> scope_busy_;
    std::vector<SignedEvent> dead_letters_;
};

}  // namespace aegis
