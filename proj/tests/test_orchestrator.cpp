#include <doctest.h>

#include "aegis/catalog.hpp"
#include "aegis/orchestrator.hpp"
#include "aegis/sha256.hpp"

using namespace aegis;

namespace {

// An orchestrator on a manual clock with a scriptable endpoint.
struct Rig {
    SimClock clock;
    SchemaRegistry schemas;
    IdentityRegistry identities;
    IdSource ids{13};
    std::unique_ptr<EventSigner> signer;
    std::unique_ptr<Orchestrator> orch;
    std::string agent = "spiffe://enterprise/agents/l3";
    std::string orch_id = "spiffe://enterprise/orch/icam";
    std::string approver = "spiffe://enterprise/people/irm";

    std::vector<DeliveryRecordData> records;
    std::vector<SignedEvent> queued_log;
    std::vector<std::pair<std::string, std::string>> failures;  // (key, reason)
    std::vector<std::string> acked_keys;
    // Scripted endpoint: per-call status codes (default 200), fixed latency.
    std::map<std::string, std::vector<int>> scripted_status;
    SimTime endpoint_latency = 0;

    Rig() {
        register_builtin_schemas(schemas);
        for (const auto& [spiffe, tag] : std::vector<std::pair<std::string, std::string>>{
                 {agent, "l3"}, {orch_id, "orch"}, {approver, "irm"}}) {
            RegisteredKey key;
            key.kid = "kid-" + tag;
            key.key_hex = sha256_hex("key-" + tag);
            identities.register_identity(spiffe, key);
            identities.attest(spiffe, sha256_hex("build-" + tag), "uri://ci/" + tag, 0, kNever);
        }
        signer = std::make_unique<EventSigner>(schemas, identities, ids);
        orch = std::make_unique<Orchestrator>(clock, schemas, identities, ids);
        auto& hooks = orch->hooks();
        hooks.endpoint = [this](const std::string&, const SignedEvent& ev) {
            int status = 200;
            auto& script = scripted_status[ev.idempotency_key];
            if (!script.empty()) {
                status = script.front();
                script.erase(script.begin());
            }
            return EndpointResult{status, endpoint_latency};
        };
        hooks.record = [this](const DeliveryRecordData& d) { records.push_back(d); };
        hooks.on_queued = [this](const SignedEvent& ev) { queued_log.push_back(ev); };
        hooks.on_acked = [this](const SignedEvent& ev) { acked_keys.push_back(ev.idempotency_key); };
        hooks.on_failed = [this](const SignedEvent& ev, const std::string& reason) {
            failures.emplace_back(ev.idempotency_key, reason);
        };
        hooks.release_sign = [this](const SignedEvent& original, const Envelope& updated) {
            Envelope env = updated;
            env.provenance.producer_spiffe = orch_id;
            env.provenance.attestation_ref =
                identities.current_attestation_uri(orch_id);
            return signer->sign(original.payload, original.oc_type, env, orch_id, clock.now());
        };
    }

    Envelope envelope(std::vector<Constraint> constraints = {}) {
        Envelope env = new_envelope("mission-soc-operations", "thread-x", "SoarOrchestrationAgent",
                                    "route_playbook", {{"IR-Policy-v3", ""}},
                                    std::move(constraints), Classification::internal, false,
                                    {agent, "kid-l3", attestation_uri(agent, sha256_hex("build-l3"))},
                                    ids);
        env.decision_basis.evidence_refs = {"uri://evt/cluster"};
        return env;
    }

    SignedEvent action(const std::string& identity_id, const std::string& incident,
                       std::vector<Constraint> constraints = {}) {
        json payload{{"action_id", ids.fresh("act")},
                     {"identity_id", identity_id},
                     {"asset_id", "srv-db-01"},
                     {"incident_ref", incident},
                     {"reason", "playbook:medium"}};
        return signer->sign(payload, "RevokeTokens", envelope(std::move(constraints)), agent,
                            clock.now());
    }

    SignedEvent mutation(const std::string& employee, const std::string& op,
                         const std::string& system) {
        json payload{{"mutation_id", ids.fresh("mut")},
                     {"target_system", system},
                     {"operation_type", op},
                     {"target_resource", "user"},
                     {"employee_id", employee},
                     {"scim_payload", json::object()},
                     {"reason", "joiner"},
                     {"requested_at", clock.now()},
                     {"effective_ts", clock.now()}};
        return signer->sign(payload, "SCIMMutation", envelope(), agent, clock.now());
    }

    Approval approval(const std::string& role, const std::string& task_id) {
        Approval a{role, approver, clock.now(), ""};
        a.signature_hex =
            identities.sign(approver, approval_signing_bytes(task_id, a), clock.now()).second;
        return a;
    }

    std::vector<SimTime> attempt_times(const std::string& key) {
        std::vector<SimTime> out;
        for (const auto& r : records)
            if (r.record_kind == "attempt" && r.subject_key == key) out.push_back(r.at);
        return out;
    }
};

}  // namespace

TEST_CASE("backoff delay formula is min(base * factor^k, cap)") {
    BackoffPolicy policy{100, 2.0, 1000, 5};
    CHECK(policy.delay(0) == 100);
    CHECK(policy.delay(1) == 200);
    CHECK(policy.delay(2) == 400);
    CHECK(policy.delay(3) == 800);
    CHECK(policy.delay(4) == 1000);  // capped
    CHECK(policy.delay(10) == 1000);
}

TEST_CASE("routing picks the highest-priority match, ties by declaration order") {
    Rig rig;
    RoutingRule low;
    low.rule_id = "low";
    low.priority = 1;
    low.oc_type = "RevokeTokens";
    low.target_agent = "G2";
    RoutingRule high = low;
    high.rule_id = "high";
    high.priority = 9;
    high.target_agent = "L3";
    RoutingRule tie = high;
    tie.rule_id = "tie-later";
    tie.target_agent = "G1";
    rig.orch->set_rules({low, high, tie});

    SignedEvent ev = rig.action("u1", "inc-1");
    auto dispatch = rig.orch->route(ev);
    REQUIRE(dispatch.has_value());
    CHECK(dispatch->rule_id == "high");
    CHECK(dispatch->target_agent == "L3");
    CHECK(dispatch->child_env.thread_id == ev.thread_id);
    CHECK(dispatch->child_env.task_id != ev.envelope.task_id);

    // 50 random events vs 10 rules: selection equals a brute-force scan.
    RngStream rng(3, "routing");
    std::vector<RoutingRule> rules;
    for (int i = 0; i < 10; ++i) {
        RoutingRule r;
        r.rule_id = "r" + std::to_string(i);
        r.priority = static_cast<int>(rng.next_below(5));
        if (rng.chance(0.5)) r.oc_type = rng.chance(0.5) ? "RevokeTokens" : "SCIMMutation";
        if (rng.chance(0.3)) r.mission_id = "mission-soc-operations";
        r.target_agent = "A" + std::to_string(i);
        rules.push_back(r);
    }
    rig.orch->set_rules(rules);
    for (int i = 0; i < 50; ++i) {
        SignedEvent e = rng.chance(0.5) ? rig.action("u", "inc") : rig.mutation("e1", "create", "azure_ad");
        const RoutingRule* expect = nullptr;
        for (const auto& r : rules)
            if (r.matches(e) && (!expect || r.priority > expect->priority)) expect = &r;
        auto got = rig.orch->route(e);
        if (!expect) {
            CHECK_FALSE(got.has_value());
        } else {
            REQUIRE(got.has_value());
            CHECK(got->rule_id == expect->rule_id);
        }
    }
}

TEST_CASE("unroutable events are dead-lettered, not dropped") {
    Rig rig;
    rig.orch->set_rules({});
    SignedEvent ev = rig.action("u1", "inc-1");
    auto dispatch = rig.orch->route(ev);
    CHECK_FALSE(dispatch.has_value());
    REQUIRE(rig.orch->dead_letters().size() == 1);
    CHECK(rig.orch->dead_letters()[0].trace_id == ev.trace_id);
    bool recorded = false;
    for (const auto& r : rig.records) recorded |= r.record_kind == "dead_letter";
    CHECK(recorded);

    SignedEvent corrupt = ev;
    corrupt.signature_hex[0] ^= 1;
    CHECK_THROWS_AS(rig.orch->route(corrupt), Error);
}

TEST_CASE("ack on first attempt; duplicate submissions return the same state") {
    Rig rig;
    SignedEvent ev = rig.mutation("78421", "create", "azure_ad");
    DeliveryState st = rig.orch->submit(ev, 0);
    CHECK(st.status == DeliveryStatus::queued);
    rig.clock.run_all();
    const DeliveryState* done = rig.orch->find_delivery(ev.idempotency_key);
    REQUIRE(done);
    CHECK(done->status == DeliveryStatus::acked);
    CHECK(done->attempts == 1);
    CHECK(rig.queued_log.size() == 1);

    // Same idempotency key again: no new delivery, attempts unchanged.
    DeliveryState dup = rig.orch->submit(ev, rig.clock.now());
    CHECK(dup.status == DeliveryStatus::acked);
    CHECK(dup.attempts == 1);
    rig.clock.run_all();
    CHECK(rig.acked_keys.size() == 1);
    CHECK(rig.queued_log.size() == 1);
}

TEST_CASE("non-state-changing events are rejected at submit") {
    Rig rig;
    json payload{{"assessment_id", "a"}, {"subject_kind", "incident"}, {"subject_ref", "i"},
                 {"risk_score", 0.3},    {"rationale", "r"},           {"assessed_at", 0}};
    SignedEvent ev = rig.signer->sign(payload, "RiskAssessment", rig.envelope(), rig.agent, 0);
    CHECK_THROWS_AS(rig.orch->submit(ev, 0), Error);
}

TEST_CASE("retry timestamps follow the closed-form backoff exactly, then fail permanently") {
    Rig rig;
    rig.orch->set_backoff({100, 2.0, 60'000, 5});
    SignedEvent ev = rig.mutation("78421", "create", "azure_ad");

    SUBCASE("three failures then success") {
        rig.scripted_status[ev.idempotency_key] = {500, 500, 500, 200};
        rig.orch->submit(ev, 0);
        rig.clock.run_all();
        auto attempts = rig.attempt_times(ev.idempotency_key);
        // Offsets +100, +200, +400 after the initial attempt at t=0.
        CHECK(attempts == std::vector<SimTime>{0, 100, 300, 700});
        CHECK(rig.orch->find_delivery(ev.idempotency_key)->status == DeliveryStatus::acked);
        CHECK(rig.orch->find_delivery(ev.idempotency_key)->attempts == 4);
    }

    SUBCASE("permanent failure after max_retries+1 attempts opens a ticket path") {
        rig.scripted_status[ev.idempotency_key] = std::vector<int>(10, 503);
        rig.orch->submit(ev, 0);
        rig.clock.run_all();
        auto attempts = rig.attempt_times(ev.idempotency_key);
        CHECK(attempts.size() == 6);  // max_retries 5 -> 6 attempts
        CHECK(attempts == std::vector<SimTime>{0, 100, 300, 700, 1500, 3100});
        const DeliveryState* st = rig.orch->find_delivery(ev.idempotency_key);
        CHECK(st->status == DeliveryStatus::failed_permanent);
        REQUIRE(rig.failures.size() == 1);
        CHECK(rig.failures[0].first == ev.idempotency_key);
    }
}

TEST_CASE("per-key ordering: deliveries complete in submission order per employee") {
    Rig rig;
    rig.endpoint_latency = 50;
    rig.orch->set_backoff({100, 2.0, 60'000, 5});

    // Interleave two employees; make emp-a's first delivery retry so a naive
    // scheduler would reorder.
    SignedEvent a1 = rig.mutation("emp-a", "create", "azure_ad");
    SignedEvent a2 = rig.mutation("emp-a", "update", "azure_ad");
    SignedEvent b1 = rig.mutation("emp-b", "create", "azure_ad");
    rig.scripted_status[a1.idempotency_key] = {500, 500, 200};
    rig.orch->submit(a1, 0);
    rig.orch->submit(a2, 0);
    rig.orch->submit(b1, 0);
    rig.clock.run_all();

    std::vector<std::string> completed;
    for (const auto& r : rig.records)
        if (r.record_kind == "acked") completed.push_back(r.subject_key);
    REQUIRE(completed.size() == 3);
    // Per-key order holds: a1 strictly before a2.
    auto pos = [&](const std::string& k) {
        return std::find(completed.begin(), completed.end(), k) - completed.begin();
    };
    CHECK(pos(a1.idempotency_key) < pos(a2.idempotency_key));
    // emp-b is unconstrained and finishes first here (emp-a is retrying).
    CHECK(pos(b1.idempotency_key) == 0);
}

TEST_CASE("randomized schedules keep every per-key subsequence in submission order") {
    Rig rig;
    rig.endpoint_latency = 7;
    RngStream rng(91, "ordering");
    std::map<std::string, std::vector<std::string>> submitted;  // employee -> keys in order
    std::vector<SignedEvent> events;
    const char* ops[] = {"create", "update", "deprovision"};
    const char* systems[] = {"azure_ad", "okta", "github", "legacy_app", "payroll_sys"};
    for (int i = 0; i < 120; ++i) {
        std::string emp = "emp-" + std::to_string(rng.next_below(8));
        // Spread ops/systems/time so idempotency keys stay distinct.
        SimTime at = static_cast<SimTime>(i) * 61'000;
        rig.clock.run_until(at);
        SignedEvent ev = rig.mutation(emp, ops[rng.next_below(3)], systems[rng.next_below(5)]);
        if (rng.chance(0.3))
            rig.scripted_status[ev.idempotency_key] = {500, 200};
        rig.orch->submit(ev, at);
        submitted[emp].push_back(ev.idempotency_key);
        events.push_back(ev);
    }
    rig.clock.run_all();

    std::map<std::string, std::vector<std::string>> completed;
    for (const auto& r : rig.records) {
        if (r.record_kind != "acked") continue;
        for (const auto& ev : events)
            if (ev.idempotency_key == r.subject_key)
                completed[ev.payload["employee_id"].get<std::string>()].push_back(r.subject_key);
    }
    for (const auto& [emp, keys] : submitted) CHECK(completed[emp] == keys);
}

TEST_CASE("cosign-gated submissions pend, release on full approval, and re-emit") {
    Rig rig;
    SignedEvent ev = rig.action("u1", "inc-9",
                                {Constraint::cosign({"IR.Manager", "SystemOwner.ServiceX"})});
    DeliveryState st = rig.orch->submit(ev, 0);
    CHECK(st.status == DeliveryStatus::pending_approval);
    CHECK(rig.orch->pending_count() == 1);
    rig.clock.run_until(10);
    CHECK(rig.queued_log.empty());  // nothing visible until released

    // First approval: still pending.
    rig.clock.run_until(100);
    DeliveryState after_one =
        rig.orch->approve(st.pending_id, rig.approval("IR.Manager", ev.envelope.task_id), 100);
    CHECK(after_one.status == DeliveryStatus::pending_approval);

    // Wrong role rejected.
    CHECK_THROWS_AS(rig.orch->approve(st.pending_id, rig.approval("Nobody", ev.envelope.task_id), 110),
                    Error);

    // Second approval releases one tick later: the re-emitted event carries
    // the approvals and a fresh emitted_at strictly after them.
    rig.clock.run_until(200);
    rig.orch->approve(st.pending_id, rig.approval("SystemOwner.ServiceX", ev.envelope.task_id),
                      200);
    rig.clock.run_all();
    REQUIRE(rig.queued_log.size() == 1);
    const SignedEvent& released = rig.queued_log[0];
    CHECK(released.producer == rig.orch_id);
    CHECK(released.payload == ev.payload);
    CHECK(released.envelope.approvals.size() == 2);
    for (const auto& a : released.envelope.approvals) CHECK(a.approved_at < released.emitted_at);
    CHECK(verify_event(released, rig.schemas, rig.identities).passed);
    CHECK(rig.orch->find_delivery(ev.idempotency_key)->status == DeliveryStatus::acked);
    CHECK(rig.orch->pending_count() == 0);

    CHECK_THROWS_AS(rig.orch->approve("pending-nope", rig.approval("IR.Manager", "t"), 0), Error);
}

TEST_CASE("random approval sequences release exactly at the first covering prefix") {
    RngStream rng(17, "prefix");
    const std::vector<std::string> roles = {"r1", "r2", "r3"};
    for (int trial = 0; trial < 20; ++trial) {
        Rig rig;
        SignedEvent ev = rig.action("u1", "inc-" + std::to_string(trial),
                                    {Constraint::cosign(roles)});
        DeliveryState st = rig.orch->submit(ev, 0);
        REQUIRE(st.status == DeliveryStatus::pending_approval);

        // A random sequence of role approvals (with repeats filtered by the
        // duplicate guard).
        std::vector<std::string> sequence;
        std::set<std::string> seen;
        while (seen.size() < roles.size()) {
            std::string role = roles[rng.next_below(roles.size())];
            if (seen.insert(role).second) sequence.push_back(role);
        }
        std::set<std::string> covered;
        for (std::size_t i = 0; i < sequence.size(); ++i) {
            rig.clock.run_until(100 * (static_cast<SimTime>(i) + 1));
            rig.orch->approve(st.pending_id, rig.approval(sequence[i], ev.envelope.task_id),
                              rig.clock.now());
            covered.insert(sequence[i]);
            bool covering = covered.size() == roles.size();
            // The release lands one tick after the covering approval.
            rig.clock.run_until(rig.clock.now() + 1);
            bool queued_or_later =
                rig.orch->find_delivery(ev.idempotency_key)->status != DeliveryStatus::pending_approval;
            CHECK(queued_or_later == covering);
        }
    }
}

TEST_CASE("unapproved pendings expire into failed_permanent with a reason") {
    Rig rig;
    rig.orch->set_approval_timebox(5'000);
    SignedEvent ev = rig.action("u1", "inc-exp", {Constraint::cosign({"IR.Manager"})});
    rig.orch->submit(ev, 0);
    rig.clock.run_all();
    const DeliveryState* st = rig.orch->find_delivery(ev.idempotency_key);
    REQUIRE(st);
    CHECK(st->status == DeliveryStatus::failed_permanent);
    CHECK(st->fail_reason == "ApprovalTimeout");
    REQUIRE(rig.failures.size() == 1);
    CHECK(rig.failures[0].second == "ApprovalTimeout");
    CHECK(rig.queued_log.empty());
}

TEST_CASE("every submission terminates in exactly one terminal disposition") {
    Rig rig;
    rig.orch->set_backoff({10, 2.0, 100, 2});
    RngStream rng(5, "loss");
    std::vector<std::string> keys;
    for (int i = 0; i < 40; ++i) {
        rig.clock.run_until(static_cast<SimTime>(i) * 61'000);
        SignedEvent ev = rig.mutation("emp-" + std::to_string(i), "create", "azure_ad");
        if (rng.chance(0.4)) rig.scripted_status[ev.idempotency_key] = std::vector<int>(5, 500);
        rig.orch->submit(ev, rig.clock.now());
        keys.push_back(ev.idempotency_key);
    }
    rig.clock.run_all();
    for (const auto& key : keys) {
        const DeliveryState* st = rig.orch->find_delivery(key);
        REQUIRE(st);
        bool terminal = st->status == DeliveryStatus::acked ||
                        st->status == DeliveryStatus::failed_permanent;
        CHECK(terminal);
    }
    // failed_permanent always has a companion failure notification.
    std::size_t failed = 0;
    for (const auto& key : keys)
        if (rig.orch->find_delivery(key)->status == DeliveryStatus::failed_permanent) ++failed;
    CHECK(rig.failures.size() == failed);
}
