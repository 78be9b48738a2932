#include <algorithm>
#include <cctype>
#include <filesystem>

#include "aegis/logio.hpp"
#include "aegis/scenario.hpp"
#include "aegis/sha256.hpp"

namespace aegis {

namespace {

struct Roster {
    std::string department;
    std::string job_title;
    std::string location;
    bool active = true;
    bool on_leave = false;
};

struct SimEndpoint {
    EndpointProfile profile;
    RngStream rng;
};

struct DeptProfile {
    const char* department;
    std::vector<const char*> titles;
};

const std::vector<DeptProfile>& dept_profiles() {
    static const std::vector<DeptProfile> profiles = {
        {"Finance", {"Analyst", "Analyst", "Controller", "Payroll Admin"}},
        {"Engineering", {"Developer", "Developer", "Developer", "Platform Admin"}},
        {"HR", {"Generalist", "Partner"}},
        {"Sales", {"Representative", "Manager"}},
        {"IT", {"Support", "Administrator"}},
    };
    return profiles;
}

const std::vector<const char*>& alert_asset_pool() {
    static const std::vector<const char*> pool = {"wks-1001", "wks-1002", "srv-api-7", "vpn-gw",
                                                  "srv-db-01"};
    return pool;
}

}  // namespace

struct Scenario::Impl {
    ScenarioConfig config;
    SimClock clock;
    IdSource ids;
    SchemaRegistry schemas;
    IdentityRegistry registry;
    std::unique_ptr<EventSigner> signer;
    std::unique_ptr<AgentRuntime> runtime;
    EvidenceGraph graph;
    std::unique_ptr<Orchestrator> orch;
    ScimDirectory directory;
    std::map<std::string, SimEndpoint> endpoints;
    std::unique_ptr<JmlEngine> jml;
    std::unique_ptr<SocEngine> soc;

    std::vector<SignedEvent> log;
    std::map<std::string, IdentityGraphRecord> cstore;
    std::map<std::string, AgentSpec> agents;
    std::map<std::string, std::string> role_to_approver;
    std::map<std::string, Roster> roster;
    TemplateJudgment judgment;
    std::vector<std::string> hire_order;  // active employee ids, draw pool
    int next_employee = 1;
    std::set<std::string> ack_recorded;  // (agent|task) pairs already acked

    RngStream attr_rng, approval_rng, sod_rng, alert_rng, disposition_rng;

    static constexpr const char* kOrchSpiffe = "spiffe://enterprise/orch/icam";
    static constexpr const char* kHrisFeed = "spiffe://enterprise/feeds/hris";
    static constexpr const char* kSiemFeed = "spiffe://enterprise/feeds/siem";

    explicit Impl(ScenarioConfig cfg)
        : config(std::move(cfg)),
          ids(config.seed),
          attr_rng(config.seed, "hris-attrs"),
          approval_rng(config.seed, "approvals"),
          sod_rng(config.seed, "sod"),
          alert_rng(config.seed, "alert-attrs"),
          disposition_rng(config.seed, "dispositions") {
        register_builtin_schemas(schemas);
        signer = std::make_unique<EventSigner>(schemas, registry, ids);
        runtime = std::make_unique<AgentRuntime>(schemas, registry, *signer);
        orch = std::make_unique<Orchestrator>(clock, schemas, registry, ids);
        setup_identities();
        setup_assets_and_policies();
        setup_endpoints();
        setup_engines();
        seed_initial_employees();
    }

    // --- setup ---------------------------------------------------------------

    RegisteredKey make_key(const std::string& kid_tag) {
        RegisteredKey key;
        key.kid = "kid-" + kid_tag + "-01";
        key.key_hex = sha256_hex("key-material:" + kid_tag + ":" + std::to_string(config.seed));
        return key;
    }

    void register_attested(const std::string& spiffe, const std::string& kid_tag) {
        registry.register_identity(spiffe, make_key(kid_tag));
        registry.attest(spiffe, sha256_hex("build:" + kid_tag), "uri://ci/pipelines/" + kid_tag, 0,
                        kNever);
    }

    void setup_identities() {
        register_attested(kOrchSpiffe, "orch-icam");
        register_attested(kHrisFeed, "feed-hris");
        register_attested(kSiemFeed, "feed-siem");

        auto add_agent = [&](const std::string& code, char domain, const std::string& role_name,
                             std::set<std::string> in, std::set<std::string> out, SimTime cost) {
            std::string tag = "agent-" + code;
            std::string spiffe = "spiffe://enterprise/agents/" + code;
            for (auto& ch : tag) ch = static_cast<char>(std::tolower(ch));
            for (auto& ch : spiffe) ch = static_cast<char>(std::tolower(ch));
            register_attested(spiffe, tag);
            AgentSpec spec;
            spec.agent_code = code;
            spec.domain = domain;
            spec.role_name = role_name;
            spec.input_schemas = std::move(in);
            spec.output_schemas = std::move(out);
            spec.identity = spiffe;
            spec.lifecycle = Lifecycle::production;
            spec.cost_ms = cost;
            agents[code] = std::move(spec);
        };
        add_agent("C1", 'C', "IdentityProvisioningAgent", {"HrisEvent"},
                  {"SCIMMutation", "AccessChangeEvent", "SoDViolation", "RiskAssessment",
                   "OpenTicket"},
                  200);
        add_agent("D2", 'D', "SiemAnalystAgent", {"RawAlert"}, {"AlertCluster"}, 150);
        add_agent("G1", 'G', "IncidentTriageAgent", {"AlertCluster"},
                  {"IncidentCase", "RiskAssessment", "IncidentSummary"}, 200);
        add_agent("G4", 'G', "ForensicAnalysisAgent", {"IncidentCase"}, {"IncidentTimeline"}, 300);
        add_agent("L3", 'L', "SoarOrchestrationAgent", {"IncidentCase"},
                  {"RevokeTokens", "ForcePasswordReset", "OpenTicket"}, 150);
        add_agent("A2", 'A', "RiskAnalysisAgent", {"IncidentSummary"}, {"RiskAssessment"}, 100);
        add_agent("A7", 'A', "MetricsAggregatorAgent", {"IncidentSummary"}, {"MetricsRecord"}, 100);

        // Approver identities for every role referenced by SoD chains,
        // crown-jewel owners, and playbook gates.
        std::set<std::string> roles{"IR.Manager", "SoD.Officer"};
        for (const auto& rule : config.role_catalog.sod_rules)
            for (const auto& r : rule.approver_chain) roles.insert(r);
        for (const auto& [id, asset] : config.assets.all())
            for (const auto& r : asset.owner_roles) roles.insert(r);
        int n = 1;
        for (const auto& role : roles) {
            std::string slug = role;
            for (auto& ch : slug) ch = (std::isalnum(static_cast<unsigned char>(ch)) != 0)
                                           ? static_cast<char>(std::tolower(ch))
                                           : '-';
            std::string spiffe = "spiffe://enterprise/people/" + slug;
            register_attested(spiffe, "person-" + slug + "-" + std::to_string(n++));
            role_to_approver[role] = spiffe;
        }
    }

    void setup_assets_and_policies() {
        for (const auto& [id, asset] : config.assets.all()) {
            EvidenceNode node;
            node.node_id = asset_node_uri(id);
            node.kind = NodeKind::asset_record;
            node.payload_ref = id;
            node.created_at = 0;
            node.producer = kOrchSpiffe;
            node.thread_id = "thread-setup";
            graph.put_node(std::move(node));
        }
        for (const auto& policy : {"AC-2", "IA-2", "SoD-Policy-v3", "IR-Policy-v3",
                                   "Detection-Policy-v1", "Baseline-Hardening-v2"}) {
            EvidenceNode node;
            node.node_id = policy_node_uri(policy);
            node.kind = NodeKind::policy_bundle;
            node.payload_ref = policy;
            node.created_at = 0;
            node.producer = kOrchSpiffe;
            node.thread_id = "thread-setup";
            graph.put_node(std::move(node));
        }
    }

    void setup_endpoints() {
        for (const auto& profile : config.endpoints) {
            endpoints.emplace(profile.target_system,
                              SimEndpoint{profile, RngStream(config.seed,
                                                             "endpoint-" + profile.target_system)});
        }
        if (!endpoints.count("soar"))
            endpoints.emplace("soar", SimEndpoint{{"soar", 20, 100, 0.0, 0.0, 0.0},
                                                  RngStream(config.seed, "endpoint-soar")});
    }

    Envelope ops_envelope(const std::string& role, const std::string& intent) {
        Envelope env;
        env.mission_id = "mission-ops";
        env.thread_id = "thread-ops";
        env.task_id = ids.fresh("task");
        env.role = role;
        env.intent = intent;
        env.classification = Classification::internal;
        return env;
    }

    SignedEvent sign_as(const std::string& spiffe, const json& payload, const std::string& oc_type,
                        Envelope env, SimTime now) {
        env.provenance.producer_spiffe = spiffe;
        std::string att = registry.current_attestation_uri(spiffe);
        if (!att.empty()) env.provenance.attestation_ref = att;
        return signer->sign(payload, oc_type, env, spiffe, now);
    }

    void log_event(const SignedEvent& ev) {
        log.push_back(ev);
        EvidenceNode node;
        node.node_id = event_node_uri(ev.trace_id);
        node.kind = node_kind_for_oc_type(ev.oc_type);
        if (node.kind == NodeKind::other) node.kind_name = ev.oc_type;
        node.payload_ref = ev.trace_id;
        node.created_at = ev.emitted_at;
        node.producer = ev.producer;
        node.thread_id = ev.thread_id;
        graph.put_node(std::move(node));
        std::string from = event_node_uri(ev.trace_id);
        for (const auto& p : ev.envelope.policy_refs) {
            std::string to = policy_node_uri(p.policy_id);
            if (graph.has_node(to)) graph.link(from, to, Relation::governed_by);
        }
        for (const auto& ref : ev.envelope.decision_basis.evidence_refs) {
            if (graph.has_node(ref)) graph.link(from, ref, Relation::justified_by);
        }
        for (const auto& a : ev.envelope.approvals) {
            std::string approval_node = approval_node_uri(ev.envelope.task_id, a);
            if (graph.has_node(approval_node)) graph.link(from, approval_node, Relation::approved_by);
        }
    }

    static std::string approval_node_uri(const std::string& task_id, const Approval& a) {
        return "uri://approval/" + task_id + "/" + a.role + "/" + a.approver_id;
    }

    void put_approval_node(const std::string& task_id, const Approval& a, SimTime now,
                           const std::string& thread_id) {
        std::string uri = approval_node_uri(task_id, a);
        if (graph.has_node(uri)) return;
        EvidenceNode node;
        node.node_id = uri;
        node.kind = NodeKind::other;
        node.kind_name = "Approval";
        node.payload_ref = a.approver_id;
        node.created_at = now;
        node.producer = a.approver_id;
        node.thread_id = thread_id;
        graph.put_node(std::move(node));
    }

    void record_delivery(const DeliveryRecordData& d) {
        json payload;
        payload["record_id"] = ids.fresh("rec");
        payload["record_kind"] = d.record_kind;
        payload["subject_key"] = d.subject_key;
        if (!d.subject_oc_type.empty()) payload["subject_oc_type"] = d.subject_oc_type;
        if (!d.target_system.empty()) payload["target_system"] = d.target_system;
        if (d.attempt >= 0) payload["attempt"] = d.attempt;
        if (d.status_code != 0) payload["status_code"] = d.status_code;
        if (!d.detail.empty()) payload["detail"] = d.detail;
        payload["at"] = d.at;
        log_event(sign_as(kOrchSpiffe, payload, "DeliveryRecord",
                          ops_envelope("Orchestrator", "delivery_record"), clock.now()));
    }

    void record_disposition(json fields) {
        fields["record_id"] = ids.fresh("rec");
        fields["at"] = clock.now();
        log_event(sign_as(kOrchSpiffe, fields, "DispositionRecord",
                          ops_envelope("Orchestrator", "disposition_record"), clock.now()));
    }

    // The endpoint sees canonical event bytes only; everything it needs is
    // parsed back out of the wire form.
    EndpointResult endpoint_request(const std::string& target, const std::string& request_bytes) {
        SignedEvent ev = event_from_json(json::parse(request_bytes));
        std::string key = target.empty() ? "soar" : target;
        auto it = endpoints.find(key);
        if (it == endpoints.end()) it = endpoints.find("soar");
        SimEndpoint& ep = it->second;
        SimTime latency = ep.rng.uniform_int(ep.profile.latency_min_ms, ep.profile.latency_max_ms);
        bool is_rollback = ev.payload.contains("scim_payload") &&
                           ev.payload["scim_payload"].value("rollback", false);
        double p = is_rollback ? ep.profile.rollback_failure_rate : ep.profile.failure_rate;
        if (ep.rng.chance(p)) return {503, latency};
        if (ev.oc_type == "SCIMMutation") {
            auto result = directory.apply(ev.payload, ev.idempotency_key);
            if (!result.ok) return {409, latency};
            record_delivery({result.duplicate ? "endpoint_duplicate" : "endpoint_applied",
                             ev.idempotency_key, ev.oc_type, key, -1, 0, "", clock.now()});
            if (ep.rng.chance(ep.profile.duplicate_delivery_rate)) {
                // The transport redelivers; consumer-side dedup absorbs it.
                directory.apply(ev.payload, ev.idempotency_key);
                record_delivery({"endpoint_duplicate", ev.idempotency_key, ev.oc_type, key, -1, 0,
                                 "redelivery", clock.now()});
            }
        }
        return {200, latency};
    }

    SignedEvent emit_agent_event(const std::string& agent_code, const std::string& oc_type,
                                 const json& payload, const Envelope& env, double confidence,
                                 const std::vector<std::string>& evidence_refs) {
        const AgentSpec& spec = agents.at(agent_code);
        if (!spec.output_schemas.count(oc_type))
            fail(Errc::schema_mismatch, agent_code + " may not produce " + oc_type);
        const SchemaDef* def = schemas.find_latest(oc_type);
        if (!def) fail(Errc::unknown_schema, oc_type);
        if (env.has_constraint(ConstraintKind::read_only) && def->state_changing)
            fail(Errc::readonly_violation, agent_code + " is read-only in this context");

        Envelope out_env = env;
        out_env.role = spec.role_name;
        out_env.decision_basis.confidence = confidence;
        out_env.decision_basis.evidence_refs.clear();
        for (const auto& ref : evidence_refs) {
            if (std::find(out_env.decision_basis.evidence_refs.begin(),
                          out_env.decision_basis.evidence_refs.end(),
                          ref) == out_env.decision_basis.evidence_refs.end())
                out_env.decision_basis.evidence_refs.push_back(ref);
        }
        SignedEvent ev = sign_as(spec.identity, payload, oc_type, out_env, clock.now());
        if (!def->state_changing) log_event(ev);
        return ev;
    }

    void record_agent_step(const std::string& agent_code, const std::string& task_id,
                           SimTime cost_ms) {
        std::string key = agent_code + "|" + task_id;
        if (!ack_recorded.insert(key).second) return;
        record_disposition(json{{"record_kind", "routed"}, {"agent_code", agent_code},
                                {"subject_ref", task_id}});
        record_disposition(json{{"record_kind", "agent_ack"},
                                {"agent_code", agent_code},
                                {"subject_ref", task_id},
                                {"latency_ms", cost_ms}});
    }

    Approval make_approval(const std::string& role, const std::string& task_id, SimTime at) {
        Approval a;
        a.role = role;
        a.approver_id = role_to_approver.at(role);
        a.approved_at = at;
        a.signature_hex = registry.sign(a.approver_id, approval_signing_bytes(task_id, a), at).second;
        return a;
    }

    // --- engine wiring ---------------------------------------------------------

    void setup_engines() {
        orch->set_rules(config.routing_rules);
        orch->set_backoff(config.backoff);
        orch->set_approval_timebox(config.approval_timebox_ms);
        auto& hooks = orch->hooks();
        hooks.endpoint = [this](const std::string& target, const SignedEvent& ev) {
            return endpoint_request(target, canonical_event_bytes(ev));
        };
        hooks.record = [this](const DeliveryRecordData& d) { record_delivery(d); };
        hooks.on_queued = [this](const SignedEvent& ev) { log_event(ev); };
        hooks.on_acked = [this](const SignedEvent& ev) {
            SimTime now = clock.now();
            if (ev.oc_type == "SCIMMutation") {
                apply_to_cstore(ev.payload);
                for (const auto& change : access_changes_for(ev.payload, now)) {
                    Envelope env = ev.envelope;
                    env.task_id = ids.fresh("task");
                    env.intent = "notify_access_change";
                    emit_agent_event("C1", "AccessChangeEvent", change, env, 0.95,
                                     {event_node_uri(ev.trace_id)});
                }
            }
            if (jml) jml->on_delivery_update(ev.idempotency_key, DeliveryStatus::acked, now);
            if (soc) soc->on_action_resolved(ev.idempotency_key, true, now);
        };
        hooks.on_failed = [this](const SignedEvent& ev, const std::string& reason) {
            SimTime now = clock.now();
            json ticket{{"ticket_id", ids.fresh("ticket")},
                        {"subject_kind", "delivery"},
                        {"subject_ref", ev.idempotency_key},
                        {"summary", "delivery failed: " + reason},
                        {"severity", "high"}};
            log_event(sign_as(kOrchSpiffe, ticket, "OpenTicket",
                              ops_envelope("Orchestrator", "open_ticket"), now));
            if (jml)
                jml->on_delivery_update(ev.idempotency_key, DeliveryStatus::failed_permanent, now);
            if (soc) soc->on_action_resolved(ev.idempotency_key, false, now);
        };
        hooks.release_sign = [this](const SignedEvent& original, const Envelope& updated) {
            Envelope env = updated;
            env.intent = "release_approved_action";
            return sign_as(kOrchSpiffe, original.payload, original.oc_type, env, clock.now());
        };
        hooks.on_approval = [this](const SignedEvent& original, const Approval& a) {
            put_approval_node(original.envelope.task_id, a, clock.now(), original.thread_id);
        };

        if (config.jml_enabled) {
            jml = std::make_unique<JmlEngine>(config.role_catalog, schemas, clock, ids);
            auto& jh = jml->hooks();
            jh.emit = [this](const std::string& oc_type, const json& payload, const Envelope& env,
                             double confidence, const std::vector<std::string>& refs) {
                return emit_agent_event("C1", oc_type, payload, env, confidence, refs);
            };
            jh.submit = [this](const SignedEvent& ev) { return orch->submit(ev, clock.now()); };
            jh.find_delivery = [this](const std::string& key) { return orch->find_delivery(key); };
            jh.verify_approval = registry.approval_verifier();
            jh.asset_for_system = [this](const std::string& system) {
                return config.assets.find(system);
            };
            jh.current_view = [this](const std::string& employee) {
                auto it = cstore.find(employee);
                if (it != cstore.end()) return it->second;
                IdentityGraphRecord record;
                record.employee_id = employee;
                return record;
            };
            jh.observe_directory = [this](const std::string& employee) {
                return directory.view(employee);
            };
            jh.request_approvals = [this](const std::string& task_key,
                                          const std::vector<std::string>& roles) {
                schedule_jml_approvals(task_key, roles);
            };
            jh.on_transition = [this](const JmlTask& task, JmlState from, JmlState to) {
                json rec{{"record_kind", "task_transition"},
                         {"agent_code", "C1"},
                         {"employee_id", task.employee_id},
                         {"subject_ref", task.task_key},
                         {"from_state", jml_state_name(from)},
                         {"to_state", jml_state_name(to)},
                         {"detail", jml_event_type_name(task.trigger.event_type)}};
                if (to == JmlState::closed && task.completed_at)
                    rec["latency_ms"] = *task.completed_at - task.trigger.effective_ts;
                record_disposition(std::move(rec));
                // Completed provisioning work gets a human review verdict,
                // feeding the false-alert and override-rate metrics.
                if (to == JmlState::closed || to == JmlState::rolled_back) {
                    bool incorrect = disposition_rng.chance(config.disposition_incorrect_fraction);
                    std::string task_key = task.task_key;
                    clock.schedule_in(60'000, [this, task_key, incorrect] {
                        record_disposition(json{{"record_kind", "proposal_disposition"},
                                                {"agent_code", "C1"},
                                                {"subject_ref", task_key},
                                                {"verdict", incorrect ? "incorrect" : "correct"}});
                    });
                }
            };
            jh.on_sla_breach = [this](const JmlTask& task) {
                record_disposition(json{{"record_kind", "sla_breach"},
                                        {"agent_code", "C1"},
                                        {"employee_id", task.employee_id},
                                        {"subject_ref", task.task_key},
                                        {"detail", jml_event_type_name(task.trigger.event_type)}});
            };
            jh.on_rollback_outcome = [this](const JmlTask& task, bool success) {
                record_disposition(json{{"record_kind", "rollback_outcome"},
                                        {"agent_code", "C1"},
                                        {"employee_id", task.employee_id},
                                        {"subject_ref", task.task_key},
                                        {"verdict", success ? "success" : "failure"}});
            };
        }

        if (config.soc_enabled) {
            soc = std::make_unique<SocEngine>(config.soc, config.assets, clock, ids);
            auto& sh = soc->hooks();
            sh.judgment = &judgment;
            sh.emit = [this](const std::string& code, const std::string& oc_type,
                             const json& payload, const Envelope& env, double confidence,
                             const std::vector<std::string>& refs) {
                record_agent_step(code, env.task_id, agents.at(code).cost_ms);
                SignedEvent ev = emit_agent_event(code, oc_type, payload, env, confidence, refs);
                maybe_record_proposal_disposition(code, oc_type, ev.trace_id);
                return ev;
            };
            sh.submit = [this](const SignedEvent& ev) { return orch->submit(ev, clock.now()); };
            sh.collect_related = [this](const std::string& identity,
                                        const std::set<std::string>& assets, SimTime from,
                                        SimTime to) {
                return collect_related(identity, assets, from, to);
            };
            sh.link = [this](const std::string& from, const std::string& to, Relation rel) {
                if (graph.has_node(from) && graph.has_node(to)) graph.link(from, to, rel);
            };
            sh.request_approvals = [this](const std::string& pending_id,
                                          const std::vector<std::string>& roles) {
                schedule_pending_approvals(pending_id, roles);
            };
        }
    }

    void apply_to_cstore(const json& mutation) {
        std::string employee = mutation.at("employee_id").get<std::string>();
        std::string system = mutation.at("target_system").get<std::string>();
        std::string op = mutation.at("operation_type").get<std::string>();
        const json& payload = mutation.value("scim_payload", json::object());
        auto& record = cstore[employee];
        record.employee_id = employee;
        if (op == "create") {
            if (!record.accounts.count(system)) {
                record.accounts[system] = {"acct-" + employee + "@" + system,
                                           payload.value("account_status", "active") == "active"};
                if (payload.contains("add_entitlements"))
                    for (const auto& e : payload["add_entitlements"])
                        record.entitlements.insert(e.get<std::string>());
            }
        } else if (op == "update") {
            auto it = record.accounts.find(system);
            if (it == record.accounts.end()) return;
            if (payload.contains("account_status"))
                it->second.active = payload["account_status"].get<std::string>() == "active";
            if (payload.contains("add_entitlements"))
                for (const auto& e : payload["add_entitlements"])
                    record.entitlements.insert(e.get<std::string>());
            if (payload.contains("remove_entitlements"))
                for (const auto& e : payload["remove_entitlements"])
                    record.entitlements.erase(e.get<std::string>());
        } else if (op == "deprovision") {
            record.accounts.erase(system);
            std::erase_if(record.entitlements, [&](const std::string& key) {
                return key.substr(0, key.find('|')) == system;
            });
        }
    }

    std::vector<TimelineEntry> collect_related(const std::string& identity,
                                               const std::set<std::string>& assets, SimTime from,
                                               SimTime to) {
        std::vector<TimelineEntry> entries;
        for (const auto& ev : log) {
            SimTime at = ev.emitted_at;
            if (ev.payload.contains("observed_at")) at = ev.payload["observed_at"].get<SimTime>();
            if (at < from || at > to) continue;
            bool related = false;
            if (ev.payload.value("identity_id", "") == identity) related = true;
            if (ev.payload.value("employee_id", "") == identity) related = true;
            if (assets.count(ev.payload.value("asset_id", ""))) related = true;
            if (!related) continue;
            entries.push_back({at, ev.trace_id, ev.oc_type});
        }
        return entries;
    }

    void maybe_record_proposal_disposition(const std::string& code, const std::string& oc_type,
                                           const std::string& trace_id) {
        // Human review verdicts feed the false-alert SLO; only decision
        // proposals are reviewed.
        if (oc_type != "AlertCluster" && oc_type != "IncidentCase") return;
        bool incorrect = disposition_rng.chance(config.disposition_incorrect_fraction);
        clock.schedule_in(60'000, [this, code, trace_id, incorrect] {
            record_disposition(json{{"record_kind", "proposal_disposition"},
                                    {"agent_code", code},
                                    {"subject_ref", trace_id},
                                    {"verdict", incorrect ? "incorrect" : "correct"}});
        });
    }

    void schedule_jml_approvals(const std::string& task_key, const std::vector<std::string>& roles) {
        const JmlTask* task = jml->find_task(task_key);
        if (!task) return;
        std::string task_id = task->env.task_id;

        // Decide blocks per pending finding up front, then approvals for the
        // roles that remain required.
        std::set<std::string> blocked_chain_roles;
        std::set<std::string> kept_chain_roles;
        for (const auto& finding : task->sod_findings) {
            if (finding.resolution != SodResolution::pending) continue;
            bool block = sod_rng.chance(config.sod_block_fraction);
            if (block) {
                for (const auto& r : finding.required_approvers) blocked_chain_roles.insert(r);
                SimTime at = clock.now() + approval_rng.uniform_int(config.approval_latency_min_ms,
                                                                    config.approval_latency_max_ms);
                std::string rule_id = finding.rule_id;
                clock.schedule(at, [this, task_key, rule_id] {
                    jml->on_sod_block(task_key, rule_id, clock.now());
                    bool unjustified =
                        disposition_rng.chance(config.adjudication_unjustified_fraction);
                    clock.schedule_in(5 * 60 * 1000, [this, task_key, rule_id, unjustified] {
                        record_disposition(json{{"record_kind", "sod_adjudication"},
                                                {"agent_code", "C1"},
                                                {"subject_ref", task_key + "/" + rule_id},
                                                {"verdict", unjustified ? "unjustified" : "justified"}});
                    });
                });
            } else {
                for (const auto& r : finding.required_approvers) kept_chain_roles.insert(r);
            }
        }
        for (const auto& role : roles) {
            bool in_blocked = blocked_chain_roles.count(role) > 0;
            bool in_kept = kept_chain_roles.count(role) > 0;
            if (in_blocked && !in_kept) continue;  // only blocked findings need this role
            SimTime at = clock.now() + approval_rng.uniform_int(config.approval_latency_min_ms,
                                                                config.approval_latency_max_ms);
            clock.schedule(at, [this, task_key, role, task_id] {
                const JmlTask* t = jml->find_task(task_key);
                if (!t || t->state != JmlState::awaiting_approval) return;
                if (std::find(t->cosign_roles.begin(), t->cosign_roles.end(), role) ==
                    t->cosign_roles.end())
                    return;
                Approval a = make_approval(role, task_id, clock.now());
                put_approval_node(task_id, a, clock.now(), t->env.thread_id);
                jml->on_approval(task_key, a, clock.now());
            });
        }
    }

    void schedule_pending_approvals(const std::string& pending_id,
                                    const std::vector<std::string>& roles) {
        for (const auto& role : roles) {
            SimTime at = clock.now() + approval_rng.uniform_int(config.approval_latency_min_ms,
                                                                config.approval_latency_max_ms);
            clock.schedule(at, [this, pending_id, role] {
                const PendingAction* pending = orch->find_pending(pending_id);
                if (!pending) return;  // released or expired
                Approval a = make_approval(role, pending->env.task_id, clock.now());
                put_approval_node(pending->env.task_id, a, clock.now(), pending->event.thread_id);
                orch->approve(pending_id, a, clock.now());
            });
        }
    }

    // --- workload generation -----------------------------------------------------

    void seed_initial_employees() {
        for (int i = 0; i < config.initial_employees; ++i) {
            std::string employee = "emp-" + std::to_string(next_employee++);
            const auto& dept = dept_profile_draw();
            Roster entry{dept.first, dept.second, location_draw(), true, false};
            roster[employee] = entry;
            hire_order.push_back(employee);
            // Pre-provision per the catalog so movers and leavers have
            // accounts to change.
            HrisEvent synthetic;
            synthetic.event_type = JmlEventType::hire;
            synthetic.employee_id = employee;
            synthetic.department = entry.department;
            synthetic.job_title = entry.job_title;
            synthetic.location = entry.location;
            try {
                DesiredState desired = resolve_roles(synthetic, config.role_catalog);
                std::map<std::string, std::set<std::string>> by_system;
                for (const auto& key : desired.entitlement_keys)
                    by_system[key.substr(0, key.find('|'))].insert(key);
                auto& record = cstore[employee];
                record.employee_id = employee;
                for (const auto& [system, ents] : by_system) {
                    directory.seed_account(system, employee, ents);
                    record.accounts[system] = {"acct-" + employee + "@" + system, true};
                    for (const auto& e : ents) record.entitlements.insert(e);
                }
            } catch (const Error&) {
                // attribute combo without a role rule: plain roster entry
            }
        }
    }

    std::pair<std::string, std::string> dept_profile_draw() {
        const auto& profiles = dept_profiles();
        const auto& dept = profiles[attr_rng.next_below(profiles.size())];
        const char* title = dept.titles[attr_rng.next_below(dept.titles.size())];
        return {dept.department, title};
    }

    std::string location_draw() {
        static const std::vector<const char*> locations = {"NYC", "London", "Austin", "Remote"};
        return locations[attr_rng.next_below(locations.size())];
    }

    std::string pick_active_employee() {
        std::vector<std::string> active;
        for (const auto& id : hire_order) {
            auto it = roster.find(id);
            if (it != roster.end() && it->second.active && !it->second.on_leave)
                active.push_back(id);
        }
        if (active.empty()) return "";
        return active[attr_rng.next_below(active.size())];
    }

    void schedule_hris_arrivals() {
        for (const auto& [type_name, rate] : config.hris_rates_per_hour) {
            if (rate <= 0) continue;
            JmlEventType type = jml_event_type_from(type_name);
            RngStream stream(config.seed, "hris-" + type_name);
            double t = 0;
            while (true) {
                t += stream.exponential(3600'000.0 / rate);
                if (t >= static_cast<double>(config.duration_ms)) break;
                SimTime at = static_cast<SimTime>(t);
                clock.schedule(at, [this, type] { generate_hris(type); });
            }
        }
    }

    void generate_hris(JmlEventType type) {
        SimTime now = clock.now();
        HrisEvent ev;
        ev.event_type = type;
        ev.effective_ts = now;
        ev.employment_type =
            attr_rng.chance(0.15) ? EmploymentType::contractor : EmploymentType::employee;

        if (type == JmlEventType::hire) {
            ev.employee_id = "emp-" + std::to_string(next_employee++);
            auto [dept, title] = dept_profile_draw();
            ev.department = dept;
            ev.job_title = title;
            ev.location = location_draw();
            roster[ev.employee_id] = {dept, title, ev.location, true, false};
            hire_order.push_back(ev.employee_id);
            ev.start_date = "day-" + std::to_string(now / 86'400'000);
        } else if (type == JmlEventType::transfer) {
            ev.employee_id = pick_active_employee();
            if (ev.employee_id.empty()) return;
            auto [dept, title] = dept_profile_draw();
            auto& entry = roster[ev.employee_id];
            entry.department = dept;
            entry.job_title = title;
            ev.department = dept;
            ev.job_title = title;
            ev.location = entry.location;
        } else if (type == JmlEventType::terminate || type == JmlEventType::extended_leave) {
            ev.employee_id = pick_active_employee();
            if (ev.employee_id.empty()) return;
            auto& entry = roster[ev.employee_id];
            ev.department = entry.department;
            ev.job_title = entry.job_title;
            ev.location = entry.location;
            ev.end_date = "day-" + std::to_string(now / 86'400'000);
            if (type == JmlEventType::terminate)
                entry.active = false;
            else
                entry.on_leave = true;
        } else {  // return_from_leave
            std::vector<std::string> on_leave;
            for (const auto& id : hire_order) {
                auto it = roster.find(id);
                if (it != roster.end() && it->second.on_leave) on_leave.push_back(id);
            }
            if (on_leave.empty()) return;
            ev.employee_id = on_leave[attr_rng.next_below(on_leave.size())];
            auto& entry = roster[ev.employee_id];
            entry.on_leave = false;
            ev.department = entry.department;
            ev.job_title = entry.job_title;
            ev.location = entry.location;
        }
        ev.name = "Employee " + ev.employee_id;
        ev.manager_id = "emp-0";
        ingest_hris(ev);
    }

    void ingest_hris(const HrisEvent& ev) {
        SimTime now = clock.now();
        Envelope env = new_envelope(
            "mission-jml", "thread-emp-" + ev.employee_id, "HrisFeed", intent_for(ev.event_type),
            {{"AC-2", ""}, {"IA-2", ""}, {"SoD-Policy-v3", ""}},
            {Constraint::no_emergency_admin(), Constraint::hitl_on_gap(),
             Constraint::timebox(15 * 60 * 1000)},
            Classification::internal_plus_sensitive, false, {}, ids);
        SignedEvent signed_ev = sign_as(kHrisFeed, to_json(ev), "HrisEvent", env, now);
        log_event(signed_ev);

        auto dispatch = orch->route(signed_ev);
        if (!dispatch) return;
        const AgentSpec& spec = agents.at(dispatch->target_agent);
        record_disposition(json{{"record_kind", "routed"},
                                {"agent_code", spec.agent_code},
                                {"subject_ref", signed_ev.trace_id}});
        Envelope child = dispatch->child_env;
        child.role = spec.role_name;
        InvocationResult gate = runtime->invoke(
            spec, [](AgentContext&) {}, signed_ev, child, now);
        record_disposition(json{{"record_kind", "agent_ack"},
                                {"agent_code", spec.agent_code},
                                {"subject_ref", signed_ev.trace_id},
                                {"latency_ms", gate.duration_ms}});
        if (!jml) return;

        std::string task_key =
            jml->on_hris_event(ev, child, now, event_node_uri(signed_ev.trace_id));
        const JmlTask* task = jml->find_task(task_key);
        if (!task) return;
        if (ev.effective_ts > now)
            clock.schedule(ev.effective_ts, [this, task_key] { jml->activate(task_key, clock.now()); });
        clock.schedule(task->sla_deadline + 1, [this, task_key] { jml->check_sla(task_key, clock.now()); });
        if (config.dispute_fraction > 0 && disposition_rng.chance(config.dispute_fraction)) {
            SimTime dispute_at = now + attr_rng.uniform_int(30'000, 5 * 60 * 1000);
            bool uphold = disposition_rng.chance(0.5);
            clock.schedule(dispute_at, [this, task_key] {
                record_disposition(json{{"record_kind", "dispute"},
                                        {"agent_code", "C1"},
                                        {"subject_ref", task_key}});
                jml->on_dispute(task_key, clock.now());
            });
            clock.schedule(dispute_at + 5 * 60 * 1000, [this, task_key, uphold] {
                record_disposition(json{{"record_kind", "contest_disposition"},
                                        {"agent_code", "C1"},
                                        {"subject_ref", task_key},
                                        {"verdict", uphold ? "uphold" : "overturn"}});
                jml->on_contest_disposition(task_key, uphold, clock.now());
            });
        }
    }

    static const char* intent_for(JmlEventType type) {
        switch (type) {
            case JmlEventType::hire: return "provision_joiner";
            case JmlEventType::return_from_leave: return "provision_joiner";
            case JmlEventType::transfer: return "process_mover";
            default: return "deprovision_leaver";
        }
    }

    void schedule_alert_arrivals() {
        for (const auto& [type_name, rate] : config.alert_rates_per_hour) {
            if (rate <= 0) continue;
            AlertType type = alert_type_from(type_name);
            RngStream stream(config.seed, "alerts-" + type_name);
            double t = 0;
            while (true) {
                t += stream.exponential(3600'000.0 / rate);
                if (t >= static_cast<double>(config.duration_ms)) break;
                SimTime at = static_cast<SimTime>(t);
                clock.schedule(at, [this, type] { generate_alert(type, "", "", -1.0, -1.0); });
            }
        }
        for (const auto& burst : config.bursts) {
            SimTime t = burst.at_ms;
            for (int i = 0; i < burst.login_failures; ++i) {
                clock.schedule(t, [this, burst] {
                    generate_alert(AlertType::login_failure, burst.identity_id, burst.asset_id,
                                   burst.severity, burst.confidence);
                });
                t += burst.spacing_ms;
            }
            for (int i = 0; i < burst.geo_anomalies; ++i) {
                clock.schedule(t, [this, burst] {
                    generate_alert(AlertType::geo_anomaly, burst.identity_id, burst.asset_id,
                                   burst.severity, burst.confidence);
                });
                t += burst.spacing_ms;
            }
        }
    }

    void generate_alert(AlertType type, const std::string& force_identity,
                        const std::string& force_asset, double force_severity,
                        double force_confidence) {
        SimTime now = clock.now();
        RawAlert alert;
        alert.alert_id = ids.fresh("alert");
        alert.alert_type = type;
        alert.source = type == AlertType::malware ? AlertSource::edr
                       : type == AlertType::geo_anomaly || type == AlertType::token_misuse
                           ? AlertSource::idp
                           : AlertSource::siem;
        alert.identity_id = force_identity.empty() ? pick_active_employee() : force_identity;
        if (alert.identity_id.empty()) alert.identity_id = "user-external";
        alert.asset_id = force_asset.empty()
                             ? alert_asset_pool()[alert_rng.next_below(alert_asset_pool().size())]
                             : force_asset;
        auto range = [&](double lo, double hi) {
            return lo + (hi - lo) * alert_rng.next_real();
        };
        switch (type) {
            case AlertType::login_failure: alert.severity = range(0.2, 0.5); alert.confidence = range(0.4, 0.8); break;
            case AlertType::geo_anomaly: alert.severity = range(0.4, 0.7); alert.confidence = range(0.5, 0.9); break;
            case AlertType::token_misuse: alert.severity = range(0.6, 0.9); alert.confidence = range(0.6, 0.95); break;
            case AlertType::malware: alert.severity = range(0.7, 1.0); alert.confidence = range(0.7, 0.95); break;
            case AlertType::other: alert.severity = range(0.1, 0.4); alert.confidence = range(0.3, 0.7); break;
        }
        if (force_severity >= 0) alert.severity = force_severity;
        if (force_confidence >= 0) alert.confidence = force_confidence;
        alert.observed_at = now;

        Envelope env = new_envelope("mission-soc-operations", "thread-siem-ingest", "SiemFeed",
                                    "ingest_alert", {{"IR-Policy-v3", ""}},
                                    {Constraint::no_direct_containment()},
                                    Classification::internal_plus_sensitive, false, {}, ids);
        SignedEvent signed_ev = sign_as(kSiemFeed, to_json(alert), "RawAlert", env, now);
        log_event(signed_ev);

        auto dispatch = orch->route(signed_ev);
        if (!dispatch || !soc) return;
        const AgentSpec& spec = agents.at(dispatch->target_agent);
        record_disposition(json{{"record_kind", "routed"},
                                {"agent_code", spec.agent_code},
                                {"subject_ref", signed_ev.trace_id}});
        Envelope child = dispatch->child_env;
        child.role = spec.role_name;
        InvocationResult gate = runtime->invoke(
            spec, [](AgentContext&) {}, signed_ev, child, now);
        record_disposition(json{{"record_kind", "agent_ack"},
                                {"agent_code", spec.agent_code},
                                {"subject_ref", signed_ev.trace_id},
                                {"latency_ms", gate.duration_ms}});
        soc->on_alert(alert, event_node_uri(signed_ev.trace_id));
    }

    void schedule_injections() {
        for (const auto& inj : config.injections) {
            if (inj.kind == "dispute") {
                std::string task_key = inj.params.value("task_key", "");
                bool uphold = inj.params.value("uphold", true);
                clock.schedule(inj.at_ms, [this, task_key] {
                    if (jml) jml->on_dispute(task_key, clock.now());
                });
                clock.schedule(inj.at_ms + 60'000, [this, task_key, uphold] {
                    if (jml) jml->on_contest_disposition(task_key, uphold, clock.now());
                });
            } else if (inj.kind == "adjudication") {
                json params = inj.params;
                clock.schedule(inj.at_ms, [this, params] {
                    record_disposition(json{{"record_kind", "sod_adjudication"},
                                            {"agent_code", "C1"},
                                            {"subject_ref", params.value("subject_ref", "")},
                                            {"verdict", params.value("verdict", "justified")}});
                });
            } else if (inj.kind == "approval") {
                json params = inj.params;
                clock.schedule(inj.at_ms, [this, params] {
                    std::string pending_id = params.value("pending_id", "");
                    std::string role = params.value("role", "");
                    const PendingAction* pending = orch->find_pending(pending_id);
                    if (!pending || role.empty()) return;
                    Approval a = make_approval(role, pending->env.task_id, clock.now());
                    put_approval_node(pending->env.task_id, a, clock.now(),
                                      pending->event.thread_id);
                    orch->approve(pending_id, a, clock.now());
                });
            }
            // defect injections operate on the finished log, see inject_defects
        }
    }

    // Agent lifecycle review over the finished run: evaluate SLOs, apply the
    // rollback criteria, and record every decision as a RiskAssessment-kind
    // evidence event plus a disposition line.
    std::map<std::string, LifecycleDecision> evaluate_lifecycles() {
        std::map<std::string, LifecycleDecision> decisions;
        for (auto& [code, spec] : agents) {
            AgentSLO slo;
            try {
                slo = evaluate_slos(code, log, 0, config.duration_ms);
            } catch (const Error& e) {
                if (e.code() == Errc::empty_window) continue;
                throw;
            }
            Provenance prov{spec.identity, registry.find(spec.identity)->current_kid,
                            registry.current_attestation_uri(spec.identity)};
            bool provenance_ok = registry.verify_provenance(prov, true, clock.now()).passed;
            LifecycleDecision decision = apply_rollback_criteria(
                spec, slo, config.rollback_policy, slo.false_alert_rate, provenance_ok);
            spec.lifecycle = decision.lifecycle;

            std::string reasons;
            for (const auto& r : decision.reasons) reasons += (reasons.empty() ? "" : ",") + r;
            record_disposition(json{{"record_kind", "lifecycle_decision"},
                                    {"agent_code", code},
                                    {"verdict", decision.rolled_back ? "rolled_back" : "unchanged"},
                                    {"detail", reasons}});
            json assessment{{"assessment_id", ids.fresh("assess")},
                            {"subject_kind", "agent_lifecycle"},
                            {"subject_ref", code},
                            {"risk_score", decision.rolled_back ? 0.9 : 0.1},
                            {"rationale", decision.rolled_back ? "rollback criteria tripped: " + reasons
                                                               : "slo review: no criterion tripped"},
                            {"assessed_at", clock.now()}};
            log_event(sign_as(kOrchSpiffe, assessment, "RiskAssessment",
                              ops_envelope("LifecycleReview", "apply_rollback_criteria"),
                              clock.now()));
            decisions[code] = decision;
        }
        return decisions;
    }

    RunResult run() {
        record_disposition(json{{"record_kind", "scenario_marker"}, {"detail", "start"}});
        if (config.jml_enabled) schedule_hris_arrivals();
        if (config.soc_enabled) schedule_alert_arrivals();
        schedule_injections();
        clock.run_until(config.duration_ms);
        clock.run_all();

        if (soc && (soc->clusters_emitted() > 0 || !soc->summaries().empty())) {
            Envelope base = ops_envelope("MetricsAggregatorAgent", "aggregate_metrics");
            base.mission_id = "mission-soc-operations";
            soc->finalize(0, config.duration_ms, base);
            clock.run_all();
        }

        RunResult result;
        result.lifecycle_decisions = evaluate_lifecycles();
        record_disposition(json{{"record_kind", "scenario_marker"}, {"detail", "end"}});

        result.report = compute_slo_report(log, config);

        // Config-driven defect injection corrupts the finished log so the
        // audit exercises its soundness; the ledger records what to expect.
        for (const auto& inj : config.injections) {
            if (inj.kind != "defect") continue;
            std::size_t count = inj.params.value("count", 1);
            std::uint64_t defect_seed = inj.params.value("seed", config.seed);
            auto ledger =
                Scenario::inject_defects(log, count, defect_seed, schemas, config.assets);
            result.defect_ledger.insert(result.defect_ledger.end(), ledger.begin(), ledger.end());
        }

        InvariantChecker checker{schemas, registry, graph, config.assets};
        result.audit = audit_log(log, checker);
        result.report.audit = json{{"events_checked", result.audit.events_checked},
                                   {"violations", result.audit.violations.size()},
                                   {"vacuous_hitl", result.audit.vacuous_hitl}};

        result.events = log;
        result.graph = graph.export_graph();
        result.registry = registry.export_json();
        result.directory_snapshot = directory.snapshot();
        return result;
    }
};

Scenario::Scenario(ScenarioConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
Scenario::~Scenario() = default;

RunResult Scenario::run() { return impl_->run(); }

std::vector<std::pair<std::string, std::string>> Scenario::inject_defects(
    std::vector<SignedEvent>& events, std::size_t count, std::uint64_t seed,
    const SchemaRegistry& schemas, const AssetInventory& assets) {
    RngStream rng(seed, "defects");
    std::vector<std::pair<std::string, std::string>> ledger;

    std::vector<std::size_t> state_changing;
    std::vector<std::size_t> gated;  // crown-jewel targets with approvals: HITL-defect capable
    std::vector<std::size_t> any;
    for (std::size_t i = 0; i < events.size(); ++i) {
        any.push_back(i);
        const auto& ev = events[i];
        const SchemaDef* def = schemas.find(ev.oc_type, ev.schema_version);
        if (def && def->state_changing) {
            state_changing.push_back(i);
            bool unknown = false;
            const AssetRecord* asset = resolve_target_asset(ev, schemas, assets, unknown);
            bool crown = unknown || (asset && asset->crown_jewel);
            if (crown && !ev.envelope.approvals.empty() &&
                ev.envelope.has_constraint(ConstraintKind::policy_cosign))
                gated.push_back(i);
        }
    }

    std::set<std::size_t> used;
    auto pick = [&](std::vector<std::size_t>& pool) -> std::optional<std::size_t> {
        for (int attempt = 0; attempt < 64 && !pool.empty(); ++attempt) {
            std::size_t idx = pool[rng.next_below(pool.size())];
            if (!used.count(idx)) return idx;
        }
        for (std::size_t idx : pool)
            if (!used.count(idx)) return idx;
        return std::nullopt;
    };

    std::size_t injected = 0;
    int kind = 0;
    while (injected < count) {
        if (kind == 0) {  // provenance: flip one signature nibble
            auto idx = pick(any);
            if (!idx) break;
            auto& ev = events[*idx];
            ev.signature_hex[0] = ev.signature_hex[0] == 'a' ? 'b' : 'a';
            ledger.emplace_back(ev.trace_id, "provenance");
            used.insert(*idx);
            ++injected;
        } else if (kind == 1) {
            auto idx = pick(state_changing);
            if (idx) {
                auto& ev = events[*idx];
                ev.envelope.policy_refs.clear();
                ledger.emplace_back(ev.trace_id, "traceability");
                used.insert(*idx);
                ++injected;
            }
        } else if (kind == 2) {
            auto idx = pick(state_changing);
            if (idx) {
                auto& ev = events[*idx];
                ev.envelope.decision_basis.evidence_refs.clear();
                ledger.emplace_back(ev.trace_id, "traceability");
                used.insert(*idx);
                ++injected;
            }
        } else {
            auto idx = pick(gated);
            if (idx) {
                auto& ev = events[*idx];
                ev.envelope.approvals.clear();
                ledger.emplace_back(ev.trace_id, "hitl");
                used.insert(*idx);
                ++injected;
            }
        }
        kind = (kind + 1) % 4;
    }
    return ledger;
}

// --- report -------------------------------------------------------------------

SloReport compute_slo_report(const std::vector<SignedEvent>& events,
                             const ScenarioConfig& config) {
    SloReport report;
    report.window_ms = config.duration_ms;
    report.events_total = events.size();

    std::vector<SimTime> joiner, leaver, mover;
    std::size_t blocks = 0, unjustified = 0, rollback_ok = 0, rollback_fail = 0;
    SimTime horizon = 0;
    std::map<std::string, std::string> final_state;  // task -> last observed state
    for (const auto& ev : events) {
        horizon = std::max(horizon, ev.emitted_at);
        if (ev.oc_type == "AlertCluster") ++report.clusters;
        if (ev.oc_type == "IncidentCase") ++report.incidents;
        if (ev.oc_type != "DispositionRecord") continue;
        std::string kind = ev.payload.value("record_kind", "");
        if (kind == "task_transition") {
            final_state[ev.payload.value("subject_ref", "")] = ev.payload.value("to_state", "");
            if (ev.payload.value("to_state", "") == "closed" && ev.payload.contains("latency_ms")) {
                SimTime latency = ev.payload["latency_ms"].get<SimTime>();
                std::string trigger = ev.payload.value("detail", "");
                if (trigger == "hire" || trigger == "return_from_leave")
                    joiner.push_back(latency);
                else if (trigger == "terminate" || trigger == "extended_leave")
                    leaver.push_back(latency);
                else if (trigger == "transfer")
                    mover.push_back(latency);
            }
        } else if (kind == "sla_breach") {
            ++report.sla_breaches;
        } else if (kind == "sod_adjudication") {
            ++blocks;
            if (ev.payload.value("verdict", "") == "unjustified") ++unjustified;
        } else if (kind == "rollback_outcome") {
            if (ev.payload.value("verdict", "") == "success")
                ++rollback_ok;
            else
                ++rollback_fail;
        }
    }
    for (const auto& [task, state] : final_state) report.task_outcomes[state] += 1;

    if (!joiner.empty()) report.joiner_p95_ms = nearest_rank_percentile(joiner, 0.95);
    if (!leaver.empty()) report.leaver_p95_ms = nearest_rank_percentile(leaver, 0.95);
    if (!mover.empty()) report.mover_p95_ms = nearest_rank_percentile(mover, 0.95);
    if (blocks > 0)
        report.sod_false_block_rate = static_cast<double>(unjustified) / static_cast<double>(blocks);
    if (rollback_ok + rollback_fail > 0)
        report.rollback_success_rate =
            static_cast<double>(rollback_ok) / static_cast<double>(rollback_ok + rollback_fail);

    for (const auto& code : {"C1", "D2", "G1", "G4", "L3", "A2", "A7"}) {
        try {
            report.agent_slos[code] = evaluate_slos(code, events, 0, horizon);
        } catch (const Error& e) {
            if (e.code() != Errc::empty_window) throw;
        }
    }
    return report;
}

json to_json(const SloReport& report) {
    json j;
    j["window_ms"] = report.window_ms;
    j["joiner_p95_ms"] = report.joiner_p95_ms ? json(*report.joiner_p95_ms) : json(nullptr);
    j["leaver_p95_ms"] = report.leaver_p95_ms ? json(*report.leaver_p95_ms) : json(nullptr);
    j["mover_p95_ms"] = report.mover_p95_ms ? json(*report.mover_p95_ms) : json(nullptr);
    j["sod_false_block_rate"] =
        report.sod_false_block_rate ? json(*report.sod_false_block_rate) : json(nullptr);
    j["rollback_success_rate"] =
        report.rollback_success_rate ? json(*report.rollback_success_rate) : json(nullptr);
    json agents = json::object();
    for (const auto& [code, slo] : report.agent_slos) {
        agents[code] = json{{"ack_p95_ms", slo.ack_p95_ms},
                            {"false_alert_rate", slo.false_alert_rate},
                            {"coverage", slo.coverage},
                            {"window_ms", slo.window_ms}};
    }
    j["agents"] = std::move(agents);
    j["task_outcomes"] = report.task_outcomes;
    j["sla_breaches"] = report.sla_breaches;
    j["clusters"] = report.clusters;
    j["incidents"] = report.incidents;
    j["events_total"] = report.events_total;
    if (!report.audit.is_null()) j["audit"] = report.audit;
    return j;
}

void write_run_outputs(const std::string& out_dir, const RunResult& result,
                       const ScenarioConfig& config) {
    std::filesystem::create_directories(out_dir);
    auto path = [&](const char* name) { return (std::filesystem::path(out_dir) / name).string(); };
    write_file(path("events.jsonl"), render_event_log(result.events));
    write_file(path("graph.json"), result.graph.dump() + "\n");
    write_file(path("registry.json"), result.registry.dump() + "\n");
    write_file(path("report.json"), to_json(result.report).dump() + "\n");
    write_file(path("config.json"), config.export_json().dump() + "\n");
}

}  // namespace aegis
