#include "aegis/orchestrator.hpp"

#include <algorithm>
#include <cmath>

namespace aegis {

bool RoutingRule::matches(const SignedEvent& ev) const {
    if (oc_type && *oc_type != ev.oc_type) return false;
    if (intent && *intent != ev.envelope.intent) return false;
    if (mission_id && *mission_id != ev.mission_id) return false;
    if (policy_ref) {
        bool found = false;
        for (const auto& p : ev.envelope.policy_refs)
            if (p.policy_id == *policy_ref) found = true;
        if (!found) return false;
    }
    return true;
}

json to_json(const RoutingRule& rule) {
    json j;
    j["rule_id"] = rule.rule_id;
    j["priority"] = rule.priority;
    if (rule.oc_type) j["oc_type"] = *rule.oc_type;
    if (rule.intent) j["intent"] = *rule.intent;
    if (rule.mission_id) j["mission_id"] = *rule.mission_id;
    if (rule.policy_ref) j["policy_ref"] = *rule.policy_ref;
    j["target_agent"] = rule.target_agent;
    j["required_constraints"] = json::array();
    for (const auto& c : rule.required_constraints) j["required_constraints"].push_back(to_json(c));
    return j;
}

RoutingRule routing_rule_from_json(const json& j) {
    RoutingRule r;
    r.rule_id = j.at("rule_id").get<std::string>();
    r.priority = j.at("priority").get<int>();
    if (j.contains("oc_type")) r.oc_type = j.at("oc_type").get<std::string>();
    if (j.contains("intent")) r.intent = j.at("intent").get<std::string>();
    if (j.contains("mission_id")) r.mission_id = j.at("mission_id").get<std::string>();
    if (j.contains("policy_ref")) r.policy_ref = j.at("policy_ref").get<std::string>();
    r.target_agent = j.at("target_agent").get<std::string>();
    if (j.contains("required_constraints"))
        for (const auto& c : j.at("required_constraints"))
            r.required_constraints.push_back(constraint_from_json(c));
    return r;
}

const char* delivery_status_name(DeliveryStatus s) {
    switch (s) {
        case DeliveryStatus::pending_approval: return "pending_approval";
        case DeliveryStatus::queued: return "queued";
        case DeliveryStatus::in_flight: return "in_flight";
        case DeliveryStatus::acked: return "acked";
        case DeliveryStatus::failed_permanent: return "failed_permanent";
    }
    return "queued";
}

SimTime BackoffPolicy::delay(int k) const {
    double d = static_cast<double>(base_ms) * std::pow(factor, k);
    double capped = std::min(d, static_cast<double>(cap_ms));
    return static_cast<SimTime>(capped);
}

void Orchestrator::set_rules(std::vector<RoutingRule> rules) { rules_ = std::move(rules); }

std::optional<Dispatch> Orchestrator::route(const SignedEvent& ev) {
    Verdict ok = verify_event(ev, schemas_, identities_);
    if (!ok.passed)
        fail(Errc::verification_failed, "event " + ev.trace_id + " failed verification");

    const RoutingRule* best = nullptr;
    for (const auto& rule : rules_) {
        if (!rule.matches(ev)) continue;
        if (!best || rule.priority > best->priority) best = &rule;
    }
    if (!best) {
        dead_letters_.push_back(ev);
        if (hooks_.record)
            hooks_.record({"dead_letter", ev.idempotency_key, ev.oc_type, "", -1, 0,
                           "no routing rule matched", clock_.now()});
        return std::nullopt;
    }
    Dispatch d;
    d.target_agent = best->target_agent;
    d.rule_id = best->rule_id;
    d.child_env = child_envelope(ev.envelope, best->target_agent, ev.envelope.intent, ids_);
    for (const auto& c : best->required_constraints) {
        bool present = false;
        for (const auto& existing : d.child_env.constraints)
            if (existing == c) present = true;
        if (!present) d.child_env.constraints.push_back(c);
    }
    return d;
}

std::string Orchestrator::ordering_scope_for(const SignedEvent& ev) const {
    const auto* def = schemas_.find(ev.oc_type, ev.schema_version);
    if (!def || def->ordering_key_field.empty()) return "solo:" + ev.idempotency_key;
    auto it = ev.payload.find(def->ordering_key_field);
    if (it == ev.payload.end()) return "solo:" + ev.idempotency_key;
    return ev.oc_type + ":" + (it->is_string() ? it->get<std::string>() : it->dump());
}

void Orchestrator::emit_record(const std::string& kind, const DeliveryState& st,
                               const SignedEvent& ev, int status_code, const std::string& detail,
                               SimTime at) {
    if (!hooks_.record) return;
    DeliveryRecordData r;
    r.record_kind = kind;
    r.subject_key = st.idempotency_key;
    r.subject_oc_type = ev.oc_type;
    r.target_system = ev.payload.value("target_system", "");
    r.attempt = st.attempts;
    r.status_code = status_code;
    r.detail = detail;
    r.at = at;
    hooks_.record(r);
}

DeliveryState Orchestrator::submit(const SignedEvent& ev, SimTime now) {
    Verdict ok = verify_event(ev, schemas_, identities_);
    if (!ok.passed)
        fail(Errc::verification_failed, "event " + ev.trace_id + " failed verification");
    const auto* def = schemas_.find(ev.oc_type, ev.schema_version);
    if (!def || !def->state_changing)
        fail(Errc::not_an_action, ev.oc_type + " is not a state-changing contract");

    auto existing = states_.find(ev.idempotency_key);
    if (existing != states_.end()) {
        emit_record("submitted", existing->second, ev, 0, "duplicate", now);
        return existing->second;
    }

    DeliveryState st;
    st.idempotency_key = ev.idempotency_key;
    auto& stored = states_.emplace(ev.idempotency_key, std::move(st)).first->second;
    emit_record("submitted", stored, ev, 0, "", now);

    bool needs_cosign =
        ev.envelope.has_constraint(ConstraintKind::policy_cosign) && !cosign_satisfied(ev.envelope);
    if (needs_cosign) {
        stored.status = DeliveryStatus::pending_approval;
        stored.pending_id = ids_.fresh("pending");
        PendingAction pending;
        pending.pending_id = stored.pending_id;
        pending.event = ev;
        pending.env = ev.envelope;
        for (const auto* c : ev.envelope.find_all(ConstraintKind::policy_cosign))
            for (const auto& role : c->required_roles)
                if (std::find(pending.required_roles.begin(), pending.required_roles.end(), role) ==
                    pending.required_roles.end())
                    pending.required_roles.push_back(role);
        pending.created_at = now;
        pending.expires_at = now + approval_timebox_ms_;
        std::string pid = pending.pending_id;
        std::string key = ev.idempotency_key;
        SimTime expires_at = pending.expires_at;
        pending_.emplace(pid, std::move(pending));
        emit_record("pending_approval", stored, ev, 0, stored.pending_id, now);
        clock_.schedule(expires_at, [this, pid, key] {
            auto it = pending_.find(pid);
            if (it == pending_.end() || it->second.releasing) return;  // resolved
            auto& st = states_.at(key);
            st.status = DeliveryStatus::failed_permanent;
            st.fail_reason = "ApprovalTimeout";
            st.pending_id.clear();
            emit_record("approval_timeout", st, it->second.event, 0, "", clock_.now());
            emit_record("failed_permanent", st, it->second.event, 0, "ApprovalTimeout",
                        clock_.now());
            if (hooks_.on_failed) hooks_.on_failed(it->second.event, "ApprovalTimeout");
            pending_.erase(it);
        });
        return stored;
    }

    stored.status = DeliveryStatus::queued;
    queued_events_.emplace(ev.idempotency_key, ev);
    if (hooks_.on_queued) hooks_.on_queued(ev);
    emit_record("queued", stored, ev, 0, "", now);
    enqueue(ev.idempotency_key, now);
    return stored;
}

DeliveryState Orchestrator::approve(const std::string& pending_id, const Approval& approval,
                                    SimTime now) {
    auto it = pending_.find(pending_id);
    if (it == pending_.end()) fail(Errc::unknown_pending, pending_id);
    PendingAction& pending = it->second;
    if (std::find(pending.required_roles.begin(), pending.required_roles.end(), approval.role) ==
        pending.required_roles.end())
        fail(Errc::wrong_role, approval.role + " is not required for " + pending_id);

    auto& st = states_.at(pending.event.idempotency_key);
    if (pending.releasing) return st;
    pending.env = record_cosign(pending.env, approval, identities_.approval_verifier());
    if (hooks_.on_approval) hooks_.on_approval(pending.event, approval);

    if (!cosign_satisfied(pending.env)) return st;
    pending.releasing = true;

    // All roles covered: re-emit under the orchestrator identity with the
    // approved envelope, one tick after the covering approval so every
    // approval timestamp is strictly before the release emission. The
    // producer's original signature stays intact on the pending record.
    std::string pid = pending_id;
    clock_.schedule(now + 1, [this, pid] {
        auto pit = pending_.find(pid);
        if (pit == pending_.end()) return;
        PendingAction pending = std::move(pit->second);
        pending_.erase(pit);
        auto& st = states_.at(pending.event.idempotency_key);
        SimTime release_at = clock_.now();
        SignedEvent released =
            hooks_.release_sign ? hooks_.release_sign(pending.event, pending.env) : pending.event;
        st.status = DeliveryStatus::queued;
        st.pending_id.clear();
        queued_events_.emplace(st.idempotency_key, released);
        emit_record("released", st, released, 0, "original=" + pending.event.trace_id, release_at);
        if (hooks_.on_queued) hooks_.on_queued(released);
        emit_record("queued", st, released, 0, "", release_at);
        enqueue(st.idempotency_key, release_at);
    });
    return st;
}

void Orchestrator::enqueue(const std::string& key, SimTime now) {
    const SignedEvent& ev = queued_events_.at(key);
    std::string scope = ordering_scope_for(ev);
    states_.at(key).ordering_scope = scope;
    scope_queues_[scope].push_back(key);
    if (!scope_busy_[scope]) start_next_in_scope(scope, now);
}

void Orchestrator::start_next_in_scope(const std::string& scope, SimTime) {
    auto& queue = scope_queues_[scope];
    if (queue.empty()) {
        scope_busy_[scope] = false;
        return;
    }
    scope_busy_[scope] = true;
    std::string key = queue.front();
    clock_.schedule(clock_.now(), [this, key] { attempt(key); });
}

void Orchestrator::attempt(const std::string& key) {
    auto& st = states_.at(key);
    if (st.status != DeliveryStatus::queued && st.status != DeliveryStatus::in_flight) return;
    const SignedEvent& ev = queued_events_.at(key);
    st.status = DeliveryStatus::in_flight;
    st.attempts += 1;
    SimTime started = clock_.now();
    emit_record("attempt", st, ev, 0, "", started);

    EndpointResult result{500, 0};
    if (hooks_.endpoint) result = hooks_.endpoint(ev.payload.value("target_system", ""), ev);

    clock_.schedule(started + result.latency_ms, [this, key, result] {
        auto& st = states_.at(key);
        const SignedEvent& ev = queued_events_.at(key);
        SimTime now = clock_.now();
        if (result.status >= 200 && result.status < 300) {
            st.status = DeliveryStatus::acked;
            emit_record("acked", st, ev, result.status, "", now);
            if (hooks_.on_acked) hooks_.on_acked(ev);
            auto& queue = scope_queues_[st.ordering_scope];
            queue.pop_front();
            start_next_in_scope(st.ordering_scope, now);
            return;
        }
        emit_record("nacked", st, ev, result.status, "", now);
        if (st.attempts > backoff_.max_retries) {
            st.status = DeliveryStatus::failed_permanent;
            st.fail_reason = "RetriesExhausted";
            emit_record("failed_permanent", st, ev, result.status, "RetriesExhausted", now);
            if (hooks_.on_failed) hooks_.on_failed(ev, "RetriesExhausted");
            auto& queue = scope_queues_[st.ordering_scope];
            queue.pop_front();
            start_next_in_scope(st.ordering_scope, now);
            return;
        }
        st.status = DeliveryStatus::queued;
        st.next_retry_at = now + backoff_.delay(st.attempts - 1);
        clock_.schedule(st.next_retry_at, [this, key] { attempt(key); });
    });
}

const DeliveryState* Orchestrator::find_delivery(const std::string& idempotency_key) const {
    auto it = states_.find(idempotency_key);
    return it == states_.end() ? nullptr : &it->second;
}

const PendingAction* Orchestrator::find_pending(const std::string& pending_id) const {
    auto it = pending_.find(pending_id);
    return it == pending_.end() ? nullptr : &it->second;
}

std::vector<const DeliveryState*> Orchestrator::deliveries() const {
    std::vector<const DeliveryState*> out;
    out.reserve(states_.size());
    for (const auto& [key, st] : states_) out.push_back(&st);
    return out;
}

}  // namespace aegis
