#include "aegis/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "aegis/sha256.hpp"

namespace aegis {

const char* lifecycle_name(Lifecycle l) {
    switch (l) {
        case Lifecycle::dev: return "dev";
        case Lifecycle::canary: return "canary";
        case Lifecycle::production: return "production";
        case Lifecycle::rolled_back: return "rolled_back";
    }
    return "dev";
}

json TemplateJudgment::respond(const json& request) {
    std::string kind = request.value("kind", "unknown");
    json out;
    if (kind == "explain_risk") {
        double score = request.value("score", 0.0);
        out["text"] = "risk score " + std::to_string(score) + " from weighted severity, confidence, and asset criticality";
        out["severity"] = std::min(score, 1.0);
    } else if (kind == "summarize_cluster") {
        out["text"] = "cluster of " + std::to_string(request.value("alert_count", 0)) +
                      " alerts for " + request.value("identity_id", std::string("unknown"));
    } else {
        out["text"] = "no judgment available for " + kind;
    }
    return out;
}

json judge(JudgmentPlugin& plugin, const json& request, const JudgmentExpectation& expect,
           std::vector<JudgmentTrace>& traces) {
    JudgmentTrace trace;
    trace.request_digest = sha256_hex(request.dump());
    json response = plugin.respond(request);
    trace.response_digest = sha256_hex(response.dump());

    bool all_ok = true;
    auto check = [&](const std::string& name, bool ok) {
        trace.post_checks.emplace_back(name, ok);
        all_ok = all_ok && ok;
    };

    check("response_is_object", response.is_object());
    for (const auto& field : expect.required_fields)
        check("has_" + field, response.is_object() && response.contains(field));
    if (response.is_object()) {
        for (auto it = response.begin(); it != response.end(); ++it) {
            if (it.value().is_string())
                check("text_length_" + it.key(), it.value().get<std::string>().size() <= expect.max_text_chars);
        }
        for (const auto& bound : expect.bounds) {
            if (!response.contains(bound.field)) continue;
            const auto& v = response.at(bound.field);
            bool ok = v.is_number() && v.get<double>() >= bound.min_value &&
                      v.get<double>() <= bound.max_value;
            check("bound_" + bound.field, ok);
        }
    }

    trace.used = all_ok;
    traces.push_back(trace);
    if (!all_ok) fail(Errc::postcheck_failure, "judgment response rejected by post-checks");
    return response;
}

InvocationResult AgentRuntime::invoke(const AgentSpec& spec, const AgentFn& fn,
                                      const SignedEvent& input, const Envelope& env,
                                      SimTime now) const {
    static const std::regex code_shape("[A-L][0-9]+");
    if (!std::regex_match(spec.agent_code, code_shape))
        fail(Errc::config_error, "agent code '" + spec.agent_code + "' malformed");
    if (spec.lifecycle != Lifecycle::canary && spec.lifecycle != Lifecycle::production)
        fail(Errc::lifecycle_blocked,
             spec.agent_code + " is " + lifecycle_name(spec.lifecycle));
    if (!spec.input_schemas.count(input.oc_type))
        fail(Errc::schema_mismatch,
             spec.agent_code + " does not consume " + input.oc_type);
    Verdict input_ok = verify_event(input, schemas_, identities_);
    if (!input_ok.passed)
        fail(Errc::verification_failed, "input event " + input.trace_id + " failed verification");

    if (const auto* tb = env.find_constraint(ConstraintKind::timebox)) {
        if (spec.cost_ms > tb->timebox_ms)
            fail(Errc::timebox_exceeded, spec.agent_code + " cost " + std::to_string(spec.cost_ms) +
                                             "ms exceeds timebox " +
                                             std::to_string(tb->timebox_ms) + "ms");
    }

    AgentContext ctx{input, env, now, nullptr, {}, {}, 0.0, {}};
    TemplateJudgment default_judgment;
    ctx.judgment = judgment_ ? judgment_ : &default_judgment;
    fn(ctx);

    bool read_only = env.has_constraint(ConstraintKind::read_only);
    for (const auto& [oc_type, payload] : ctx.proposals) {
        if (!spec.output_schemas.count(oc_type))
            fail(Errc::schema_mismatch, spec.agent_code + " may not produce " + oc_type);
        const auto* def = schemas_.find_latest(oc_type);
        if (!def) fail(Errc::unknown_schema, oc_type);
        if (read_only && def->state_changing)
            fail(Errc::readonly_violation,
                 spec.agent_code + " attempted state-changing " + oc_type + " under read_only");
    }

    InvocationResult result;
    result.duration_ms = spec.cost_ms;
    result.judgment_calls = ctx.traces;

    Envelope updated = env;
    const auto* ident = identities_.find(spec.identity);
    if (!ident) fail(Errc::unknown_identity, spec.identity);
    updated.provenance.producer_spiffe = spec.identity;
    updated.provenance.signing_kid = ident->current_kid;
    std::string att_uri = identities_.current_attestation_uri(spec.identity);
    if (!att_uri.empty()) updated.provenance.attestation_ref = att_uri;
    updated.decision_basis.confidence = ctx.confidence;
    updated.decision_basis.evidence_refs = env.decision_basis.evidence_refs;
    for (const auto& ref : ctx.extra_evidence_refs)
        updated.decision_basis.evidence_refs.push_back(ref);
    for (const auto& trace : ctx.traces) {
        if (trace.used) {
            updated.decision_basis.explanation_ref = "uri://judgment/" + trace.response_digest;
            break;
        }
    }
    result.updated_envelope = updated;

    for (const auto& [oc_type, payload] : ctx.proposals) {
        result.outputs.push_back(signer_.sign(payload, oc_type, updated, spec.identity, now));
    }
    return result;
}

SimTime nearest_rank_percentile(std::vector<SimTime> values, double q) {
    if (values.empty()) fail(Errc::empty_window, "percentile of empty set");
    std::sort(values.begin(), values.end());
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    if (rank == 0) rank = 1;
    if (rank > values.size()) rank = values.size();
    return values[rank - 1];
}

AgentSLO evaluate_slos(const std::string& agent_code, const std::vector<SignedEvent>& event_log,
                       SimTime window_start, SimTime window_end) {
    std::vector<SimTime> ack_latencies;
    std::size_t routed = 0, acked = 0, dispositions = 0, incorrect = 0;
    for (const auto& ev : event_log) {
        if (ev.oc_type != "DispositionRecord") continue;
        if (ev.emitted_at < window_start || ev.emitted_at > window_end) continue;
        if (ev.payload.value("agent_code", "") != agent_code) continue;
        std::string kind = ev.payload.value("record_kind", "");
        if (kind == "routed") {
            ++routed;
        } else if (kind == "agent_ack") {
            ++acked;
            ack_latencies.push_back(ev.payload.value("latency_ms", SimTime{0}));
        } else if (kind == "proposal_disposition") {
            ++dispositions;
            if (ev.payload.value("verdict", "") == "incorrect") ++incorrect;
        }
    }
    if (routed == 0 && acked == 0)
        fail(Errc::empty_window, agent_code + " has no applicable events in window");

    AgentSLO slo;
    slo.window_ms = window_end - window_start;
    slo.ack_p95_ms = ack_latencies.empty() ? 0 : nearest_rank_percentile(ack_latencies, 0.95);
    slo.false_alert_rate =
        dispositions == 0 ? 0.0 : static_cast<double>(incorrect) / static_cast<double>(dispositions);
    slo.coverage = routed == 0 ? 1.0 : static_cast<double>(acked) / static_cast<double>(routed);
    return slo;
}

LifecycleDecision apply_rollback_criteria(const AgentSpec& spec, const AgentSLO& slo,
                                          const RollbackPolicy& policy, double override_rate,
                                          bool provenance_ok) {
    if (spec.lifecycle != Lifecycle::canary && spec.lifecycle != Lifecycle::production)
        fail(Errc::lifecycle_blocked, spec.agent_code + " not in canary/production");
    LifecycleDecision decision{spec.lifecycle, false, {}};
    if (slo.false_alert_rate > policy.max_false_alert_rate)
        decision.reasons.push_back("false_alert_rate");
    if (slo.ack_p95_ms > policy.max_ack_p95_ms) decision.reasons.push_back("ack_p95");
    if (override_rate > policy.max_override_rate) decision.reasons.push_back("override_rate");
    if (policy.require_valid_attestation && !provenance_ok)
        decision.reasons.push_back("attestation");
    if (!decision.reasons.empty()) {
        decision.lifecycle = Lifecycle::rolled_back;
        decision.rolled_back = true;
    }
    return decision;
}

}  // namespace aegis
