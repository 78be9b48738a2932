#include <doctest.h>

#include "aegis/catalog.hpp"
#include "aegis/contracts.hpp"
#include "aegis/sha256.hpp"

using namespace aegis;

namespace {

struct Fixture {
    SchemaRegistry schemas;
    IdentityRegistry identities;
    IdSource ids{7};
    std::unique_ptr<EventSigner> signer;
    std::string producer = "spiffe://enterprise/agents/c1";

    Fixture() {
        register_builtin_schemas(schemas);
        RegisteredKey key;
        key.kid = "kid-c1-01";
        key.key_hex = sha256_hex("c1-key");
        identities.register_identity(producer, key);
        identities.attest(producer, sha256_hex("c1-build"), "uri://ci/c1", 0, kNever);
        signer = std::make_unique<EventSigner>(schemas, identities, ids);
    }

    Envelope envelope() {
        Envelope env = new_envelope("mission-joiners-q1", "thread-emp-78421",
                                    "IdentityProvisioningAgent", "provision_joiner",
                                    {{"AC-2", ""}, {"IA-2", ""}, {"SoD-Policy-v3", ""}}, {},
                                    Classification::internal_plus_sensitive, false,
                                    {producer, "kid-c1-01", attestation_uri(producer, sha256_hex("c1-build"))},
                                    ids);
        env.decision_basis.evidence_refs = {"uri://hris/events/hris-evt-78421"};
        return env;
    }
};

json sample_mutation() {
    return json{{"mutation_id", "uuid-1234-5678"},
                {"target_system", "azure_ad"},
                {"operation_type", "create"},
                {"target_resource", "user"},
                {"employee_id", "78421"},
                {"scim_payload", json{{"account_status", "active"}}},
                {"reason", "joiner"},
                {"requested_at", 1000},
                {"effective_ts", 1000}};
}

}  // namespace

TEST_CASE("schema registry rejects duplicates and malformed definitions") {
    SchemaRegistry reg;
    SchemaDef def;
    def.oc_type = "Thing";
    def.fields = {{"id", FieldKind::string_field, true, {}, FieldKind::string_field, {}, {}, ""}};
    def.idempotency_recipe = {"id"};
    reg.register_schema(def);
    CHECK_THROWS_AS(reg.register_schema(def), Error);

    SchemaDef bad = def;
    bad.oc_type = "Bad";
    bad.idempotency_recipe = {"missing"};
    CHECK_THROWS_AS(reg.register_schema(bad), Error);

    SchemaDef bad2 = def;
    bad2.oc_type = "Bad2";
    bad2.ordering_key_field = "nope";
    CHECK_THROWS_AS(reg.register_schema(bad2), Error);
}

TEST_CASE("list returns schemas sorted by (name, version)") {
    SchemaRegistry reg;
    for (int i = 19; i >= 0; --i) {
        SchemaDef def;
        def.oc_type = "S" + std::to_string(i % 10);
        def.version = 1 + i / 10;
        def.fields = {{"id", FieldKind::string_field, true, {}, FieldKind::string_field, {}, {}, ""}};
        def.idempotency_recipe = {"id"};
        reg.register_schema(def);
    }
    auto list = reg.list();
    REQUIRE(list.size() == 20);
    for (std::size_t i = 1; i < list.size(); ++i) {
        auto a = std::make_pair(list[i - 1]->oc_type, list[i - 1]->version);
        auto b = std::make_pair(list[i]->oc_type, list[i]->version);
        CHECK(a < b);
    }
}

TEST_CASE("the worked SCIMMutation payload validates clean") {
    Fixture f;
    auto report = f.schemas.validate(sample_mutation(), "SCIMMutation", 1);
    CHECK(report.ok());
}

TEST_CASE("operation_type outside the enum is an enum violation") {
    Fixture f;
    json payload = sample_mutation();
    payload["operation_type"] = "delete";
    auto report = f.schemas.validate(payload, "SCIMMutation", 1);
    REQUIRE(report.findings.size() == 1);
    CHECK(report.findings[0].path == "operation_type");
    CHECK(report.findings[0].code == "enum_violation");
}

TEST_CASE("single wrong-typed field yields exactly one finding at that path") {
    Fixture f;
    json base = sample_mutation();
    const auto& def = f.schemas.get("SCIMMutation", 1);
    for (const auto& field : def.fields) {
        if (!base.contains(field.name)) continue;
        json fuzzed = base;
        // Swap in a value of a definitely-wrong type.
        if (base[field.name].is_string() || base[field.name].is_object())
            fuzzed[field.name] = 12345;
        else
            fuzzed[field.name] = "wrong";
        auto report = f.schemas.validate(fuzzed, "SCIMMutation", 1);
        REQUIRE(report.findings.size() == 1);
        CHECK(report.findings[0].path == field.name);
    }

    json unknown = base;
    unknown["surprise"] = 1;
    auto strict = f.schemas.validate(unknown, "SCIMMutation", 1);
    REQUIRE(strict.findings.size() == 1);
    CHECK(strict.findings[0].code == "unknown_field");
    f.schemas.set_lenient(true);
    CHECK(f.schemas.validate(unknown, "SCIMMutation", 1).ok());
}

TEST_CASE("missing required field is reported; missing optional is not") {
    Fixture f;
    json payload = sample_mutation();
    payload.erase("employee_id");
    auto report = f.schemas.validate(payload, "SCIMMutation", 1);
    REQUIRE(report.findings.size() == 1);
    CHECK(report.findings[0].code == "missing_required");
    CHECK_THROWS_AS(f.schemas.validate(payload, "SCIMMutation", 9), Error);  // unknown version
}

TEST_CASE("idempotency keys honor the 60s floor") {
    Fixture f;
    const auto& def = f.schemas.get("SCIMMutation", 1);
    json payload = sample_mutation();

    // Same recipe tuple 10 simulated seconds apart inside one window.
    CHECK(idempotency_key(payload, def, 5'000) == idempotency_key(payload, def, 15'000));
    // Floor boundary: 59 999 vs 60 000 ms.
    CHECK(idempotency_key(payload, def, 59'999) != idempotency_key(payload, def, 60'000));

    json other = payload;
    other["employee_id"] = "99999";
    CHECK(idempotency_key(payload, def, 5'000) != idempotency_key(other, def, 5'000));

    json missing = payload;
    missing.erase("target_system");
    CHECK_THROWS_AS(idempotency_key(missing, def, 0), Error);
}

TEST_CASE("1000 random payload pairs: keys equal iff recipe tuple and floor bucket equal") {
    Fixture f;
    const auto& def = f.schemas.get("SCIMMutation", 1);
    RngStream rng(21, "idem");
    auto random_payload = [&](json& out, std::string& sys, std::string& op, std::string& emp) {
        static const char* systems[] = {"azure_ad", "okta"};
        static const char* ops[] = {"create", "update", "deprovision"};
        sys = systems[rng.next_below(2)];
        op = ops[rng.next_below(3)];
        emp = std::to_string(70000 + rng.next_below(4));
        out = sample_mutation();
        out["target_system"] = sys;
        out["operation_type"] = op;
        out["employee_id"] = emp;
    };
    for (int i = 0; i < 1000; ++i) {
        json a, b;
        std::string sys_a, op_a, emp_a, sys_b, op_b, emp_b;
        random_payload(a, sys_a, op_a, emp_a);
        random_payload(b, sys_b, op_b, emp_b);
        SimTime ta = static_cast<SimTime>(rng.next_below(240'000));
        SimTime tb = static_cast<SimTime>(rng.next_below(240'000));
        bool tuple_equal = sys_a == sys_b && op_a == op_b && emp_a == emp_b &&
                           (ta / 60'000) == (tb / 60'000);
        CHECK((idempotency_key(a, def, ta) == idempotency_key(b, def, tb)) == tuple_equal);
    }
}

TEST_CASE("sign_event stamps the envelope and verifies end to end") {
    Fixture f;
    Envelope env = f.envelope();
    SignedEvent ev = f.signer->sign(sample_mutation(), "SCIMMutation", env, f.producer, 5'000);
    CHECK(ev.mission_id == "mission-joiners-q1");
    CHECK(ev.thread_id == "thread-emp-78421");
    CHECK(ev.trace_id.rfind("trace-", 0) == 0);
    CHECK(ev.envelope.provenance.signing_kid == "kid-c1-01");
    CHECK(verify_event(ev, f.schemas, f.identities).passed);

    json bad = sample_mutation();
    bad["operation_type"] = "delete";
    CHECK_THROWS_AS(f.signer->sign(bad, "SCIMMutation", env, f.producer, 5'000), Error);
}

TEST_CASE("500 random signed events verify; any payload corruption breaks verification") {
    Fixture f;
    RngStream rng(3, "corruption");
    for (int i = 0; i < 500; ++i) {
        json payload = sample_mutation();
        payload["employee_id"] = std::to_string(10000 + rng.next_below(100000));
        payload["requested_at"] = static_cast<SimTime>(rng.next_below(1'000'000));
        Envelope env = f.envelope();
        SignedEvent ev =
            f.signer->sign(payload, "SCIMMutation", env, f.producer,
                           static_cast<SimTime>(rng.next_below(10'000'000)));
        CHECK(verify_event(ev, f.schemas, f.identities).passed);

        SignedEvent corrupted = ev;
        corrupted.payload["employee_id"] =
            corrupted.payload["employee_id"].get<std::string>() + "x";
        CHECK_FALSE(verify_event(corrupted, f.schemas, f.identities).passed);

        SignedEvent sig_flip = ev;
        sig_flip.signature_hex[rng.next_below(sig_flip.signature_hex.size())] ^= 1;
        CHECK_FALSE(verify_event(sig_flip, f.schemas, f.identities).passed);
    }
}

TEST_CASE("verify_event truth table over (schema ok, signature ok, provenance ok)") {
    for (unsigned mask = 0; mask < 8; ++mask) {
        bool schema_ok = mask & 1, sig_ok = mask & 2, prov_ok = mask & 4;
        Fixture f;
        Envelope env = f.envelope();
        SignedEvent ev = f.signer->sign(sample_mutation(), "SCIMMutation", env, f.producer, 5'000);
        if (!schema_ok) {
            ev.payload["operation_type"] = "delete";
            // re-sign so only the schema leg fails
            ev.signature_hex =
                f.identities.sign(f.producer, event_signing_bytes(ev), ev.emitted_at).second;
        }
        if (!sig_ok) ev.signature_hex[0] ^= 1;
        if (!prov_ok) f.identities.revoke(f.producer, 0);  // revoked before signing
        Verdict v = verify_event(ev, f.schemas, f.identities);
        CHECK(v.passed == (schema_ok && sig_ok && prov_ok));
    }
}

TEST_CASE("events from identities revoked after signing still verify with a note") {
    Fixture f;
    SignedEvent ev = f.signer->sign(sample_mutation(), "SCIMMutation", f.envelope(), f.producer, 5'000);
    f.identities.revoke(f.producer, 10'000);
    Verdict v = verify_event(ev, f.schemas, f.identities);
    CHECK(v.passed);
    CHECK(v.has_note("RevokedAfterSigning"));
}

TEST_CASE("canonical serialization round-trips byte-identically") {
    Fixture f;
    Envelope env = f.envelope();
    env.constraints.push_back(Constraint::cosign({"IR.Manager"}));
    SignedEvent ev = f.signer->sign(sample_mutation(), "SCIMMutation", env, f.producer, 61'000);
    std::string once = canonical_event_bytes(ev);
    SignedEvent back = event_from_json(json::parse(once));
    CHECK(canonical_event_bytes(back) == once);
    CHECK(verify_event(back, f.schemas, f.identities).passed);
}

TEST_CASE("an event validates only against its own declared version") {
    Fixture f;
    SchemaDef v2 = f.schemas.get("SCIMMutation", 1);
    v2.version = 2;
    v2.fields.push_back({"extra", FieldKind::string_field, true, {}, FieldKind::string_field, {}, {}, ""});
    f.schemas.register_schema(v2);

    json payload = sample_mutation();  // valid for v1, missing "extra" for v2
    CHECK(f.schemas.validate(payload, "SCIMMutation", 1).ok());
    CHECK_FALSE(f.schemas.validate(payload, "SCIMMutation", 2).ok());
}

TEST_CASE("schema definitions round-trip through their file form") {
    SchemaRegistry reg;
    register_builtin_schemas(reg);
    for (const auto* def : reg.list()) {
        json j = SchemaRegistry::to_json(*def);
        SchemaDef back = SchemaRegistry::schema_from_json(j);
        CHECK(SchemaRegistry::to_json(back).dump() == j.dump());
    }
    CHECK(agent_catalog().size() >= 70);
    int executable = 0;
    for (const auto& a : agent_catalog()) executable += a.executable ? 1 : 0;
    CHECK(executable == 7);
}
