#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "aegis/common.hpp"
#include "aegis/envelope.hpp"
#include "aegis/identity.hpp"

namespace aegis {

// ---------------------------------------------------------------------------
// Output-contract schema registry: every event any agent emits validates
// against a registered schema, gets a recipe-derived idempotency key, and is
// signed by its producer over canonical bytes.
// ---------------------------------------------------------------------------

enum class FieldKind {
    string_field,
    integer_field,
    real_field,
    boolean_field,
    timestamp_field,
    uri_field,
    enum_field,
    object_field,
    list_field,
};

const char* field_kind_name(FieldKind k);
FieldKind field_kind_from(const std::string& s);

struct FieldSpec {
    std::string name;
    FieldKind kind = FieldKind::string_field;
    bool required = true;
    std::vector<std::string> enum_values;           // enum_field
    FieldKind element = FieldKind::string_field;    // list_field
    std::optional<double> min_value, max_value;     // numeric range
    std::string pattern;                            // regex for string-ish kinds
};

enum class RetentionClass { audit_long, operational };

struct SchemaDef {
    std::string oc_type;
    int version = 1;
    std::vector<FieldSpec> fields;
    std::string ordering_key_field;                 // empty = unordered
    std::vector<std::string> idempotency_recipe;    // payload field names, in order
    std::int64_t floor_seconds = 60;                // time floor for the key
    bool state_changing = false;
    RetentionClass retention = RetentionClass::operational;
    // Payload fields naming the asset an action touches; candidates are
    // tried composite-first, then each alone (see invariants::resolve_asset).
    std::vector<std::string> target_asset_fields;

    const FieldSpec* find_field(const std::string& name) const;
};

struct SignedEvent {
    std::string oc_type;
    int schema_version = 1;
    json payload;
    std::string idempotency_key;
    std::string trace_id;
    std::string mission_id;
    std::string thread_id;
    Envelope envelope;
    std::string signature_hex;
    std::string producer;  // spiffe uri
    SimTime emitted_at = 0;
};

class SchemaRegistry {
public:
    // Throws DuplicateSchema / MalformedSchema.
    void register_schema(SchemaDef def);

    const SchemaDef& get(const std::string& oc_type, int version) const;  // throws UnknownSchema
    const SchemaDef* find(const std::string& oc_type, int version) const;
    const SchemaDef* find_latest(const std::string& oc_type) const;

    // Sorted by (oc_type, version).
    std::vector<const SchemaDef*> list() const;

    ValidationReport validate(const json& payload, const std::string& oc_type, int version) const;

    // Lenient mode downgrades unknown payload fields from findings to
    // nothing; used when ingesting foreign logs.
    void set_lenient(bool lenient) { lenient_ = lenient; }
    bool lenient() const { return lenient_; }

    static json to_json(const SchemaDef& def);
    static SchemaDef schema_from_json(const json& j);

private:
    std::map<std::pair<std::string, int>, SchemaDef> schemas_;
    bool lenient_ = false;
};

// sha256 over the recipe field values (UTF-8, in recipe order) and the time
// floor bucket floor(emitted_at_ms / (floor_seconds * 1000)), all joined by
// 0x1F. Lowercase hex. Throws MissingRecipeField.
std::string idempotency_key(const json& payload, const SchemaDef& def, SimTime emitted_at);

// Canonical bytes covered by the producer signature. The envelope is
// deliberately outside the signed span so approvals can be recorded in an
// updated envelope without breaking the producer's signature.
std::string event_signing_bytes(const SignedEvent& ev);

json event_to_json(const SignedEvent& ev);
SignedEvent event_from_json(const json& j);
std::string canonical_event_bytes(const SignedEvent& ev);

// Signs payloads into events on behalf of registered identities.
class EventSigner {
public:
    EventSigner(const SchemaRegistry& schemas, const IdentityRegistry& identities, IdSource& ids)
        : schemas_(schemas), identities_(identities), ids_(ids) {}

    // Throws SchemaViolation (carrying the report) / UnknownIdentity /
    // RevokedIdentity.
    SignedEvent sign(const json& payload, const std::string& oc_type, const Envelope& env,
                     const std::string& producer_spiffe, SimTime now) const;

private:
    const SchemaRegistry& schemas_;
    const IdentityRegistry& identities_;
    IdSource& ids_;
};

// Pass iff schema validation is clean, the signature verifies under the
// envelope's signing kid at emitted_at, the kid belongs to the producer, and
// provenance verifies at signing time (emitted_at).
Verdict verify_event(const SignedEvent& ev, const SchemaRegistry& schemas,
                     const IdentityRegistry& identities);

}  // namespace aegis
