#include "aegis/contracts.hpp"

#include <algorithm>
#include <regex>

#include "aegis/sha256.hpp"

namespace aegis {

const char* field_kind_name(FieldKind k) {
    switch (k) {
        case FieldKind::string_field: return "string";
        case FieldKind::integer_field: return "integer";
        case FieldKind::real_field: return "real";
        case FieldKind::boolean_field: return "boolean";
        case FieldKind::timestamp_field: return "timestamp";
        case FieldKind::uri_field: return "uri";
        case FieldKind::enum_field: return "enum";
        case FieldKind::object_field: return "object";
        case FieldKind::list_field: return "list";
    }
    return "string";
}

FieldKind field_kind_from(const std::string& s) {
    if (s == "string") return FieldKind::string_field;
    if (s == "integer") return FieldKind::integer_field;
    if (s == "real") return FieldKind::real_field;
    if (s == "boolean") return FieldKind::boolean_field;
    if (s == "timestamp") return FieldKind::timestamp_field;
    if (s == "uri") return FieldKind::uri_field;
    if (s == "enum") return FieldKind::enum_field;
    if (s == "object") return FieldKind::object_field;
    if (s == "list") return FieldKind::list_field;
    fail(Errc::parse_error, "unknown field kind '" + s + "'");
}

const FieldSpec* SchemaDef::find_field(const std::string& name) const {
    for (const auto& f : fields)
        if (f.name == name) return &f;
    return nullptr;
}

void SchemaRegistry::register_schema(SchemaDef def) {
    if (def.oc_type.empty()) fail(Errc::malformed_schema, "oc_type empty");
    if (def.version < 1) fail(Errc::malformed_schema, def.oc_type + ": version must be >= 1");
    std::set<std::string> seen;
    for (const auto& f : def.fields) {
        if (f.name.empty()) fail(Errc::malformed_schema, def.oc_type + ": unnamed field");
        if (!seen.insert(f.name).second)
            fail(Errc::malformed_schema, def.oc_type + ": duplicate field " + f.name);
        if (f.kind == FieldKind::enum_field && f.enum_values.empty())
            fail(Errc::malformed_schema, def.oc_type + "." + f.name + ": enum without values");
    }
    if (!def.ordering_key_field.empty() && !def.find_field(def.ordering_key_field))
        fail(Errc::malformed_schema,
             def.oc_type + ": ordering key " + def.ordering_key_field + " is not a field");
    for (const auto& r : def.idempotency_recipe) {
        if (!def.find_field(r))
            fail(Errc::malformed_schema, def.oc_type + ": recipe field " + r + " is not a field");
    }
    if (def.idempotency_recipe.empty())
        fail(Errc::malformed_schema, def.oc_type + ": empty idempotency recipe");
    if (def.floor_seconds <= 0)
        fail(Errc::malformed_schema, def.oc_type + ": floor_seconds must be positive");
    for (const auto& t : def.target_asset_fields) {
        if (!def.find_field(t))
            fail(Errc::malformed_schema, def.oc_type + ": target field " + t + " is not a field");
    }
    auto key = std::make_pair(def.oc_type, def.version);
    if (schemas_.count(key))
        fail(Errc::duplicate_schema,
             def.oc_type + " v" + std::to_string(def.version) + " already registered");
    schemas_.emplace(std::move(key), std::move(def));
}

const SchemaDef& SchemaRegistry::get(const std::string& oc_type, int version) const {
    const auto* def = find(oc_type, version);
    if (!def) fail(Errc::unknown_schema, oc_type + " v" + std::to_string(version));
    return *def;
}

const SchemaDef* SchemaRegistry::find(const std::string& oc_type, int version) const {
    auto it = schemas_.find({oc_type, version});
    return it == schemas_.end() ? nullptr : &it->second;
}

const SchemaDef* SchemaRegistry::find_latest(const std::string& oc_type) const {
    const SchemaDef* best = nullptr;
    for (const auto& [key, def] : schemas_) {
        if (key.first == oc_type && (!best || def.version > best->version)) best = &def;
    }
    return best;
}

std::vector<const SchemaDef*> SchemaRegistry::list() const {
    std::vector<const SchemaDef*> out;
    out.reserve(schemas_.size());
    for (const auto& [key, def] : schemas_) out.push_back(&def);  // map order = (name, version)
    return out;
}

namespace {

bool kind_matches(const json& v, FieldKind k) {
    switch (k) {
        case FieldKind::string_field:
        case FieldKind::uri_field:
        case FieldKind::enum_field:
            return v.is_string();
        case FieldKind::integer_field:
        case FieldKind::timestamp_field:
            return v.is_number_integer();
        case FieldKind::real_field:
            return v.is_number();
        case FieldKind::boolean_field:
            return v.is_boolean();
        case FieldKind::object_field:
            return v.is_object();
        case FieldKind::list_field:
            return v.is_array();
    }
    return false;
}

void check_value(const json& v, const FieldSpec& f, const std::string& path,
                 ValidationReport& report) {
    if (!kind_matches(v, f.kind)) {
        report.add(path, "type_mismatch",
                   std::string("expected ") + field_kind_name(f.kind));
        return;
    }
    switch (f.kind) {
        case FieldKind::enum_field: {
            auto s = v.get<std::string>();
            if (std::find(f.enum_values.begin(), f.enum_values.end(), s) == f.enum_values.end())
                report.add(path, "enum_violation", "value '" + s + "' not in enum");
            break;
        }
        case FieldKind::uri_field: {
            static const std::regex uri_shape("^[A-Za-z][A-Za-z0-9+.-]*://.+");
            if (!std::regex_match(v.get<std::string>(), uri_shape))
                report.add(path, "bad_uri", "value is not URI-shaped");
            break;
        }
        case FieldKind::string_field: {
            if (!f.pattern.empty() && !std::regex_match(v.get<std::string>(), std::regex(f.pattern)))
                report.add(path, "pattern_mismatch", "value does not match pattern");
            break;
        }
        case FieldKind::integer_field:
        case FieldKind::timestamp_field:
        case FieldKind::real_field: {
            double d = v.get<double>();
            if (f.min_value && d < *f.min_value)
                report.add(path, "below_min", "value below minimum");
            if (f.max_value && d > *f.max_value)
                report.add(path, "above_max", "value above maximum");
            break;
        }
        case FieldKind::list_field: {
            FieldSpec element;
            element.kind = f.element;
            element.enum_values = f.enum_values;
            for (std::size_t i = 0; i < v.size(); ++i)
                check_value(v[i], element, path + "[" + std::to_string(i) + "]", report);
            break;
        }
        default:
            break;
    }
}

}  // namespace

ValidationReport SchemaRegistry::validate(const json& payload, const std::string& oc_type,
                                          int version) const {
    const auto& def = get(oc_type, version);
    ValidationReport report;
    if (!payload.is_object()) {
        report.add("", "not_an_object", "payload must be a JSON object");
        return report;
    }
    for (const auto& f : def.fields) {
        auto it = payload.find(f.name);
        if (it == payload.end()) {
            if (f.required) report.add(f.name, "missing_required", "required field absent");
            continue;
        }
        check_value(*it, f, f.name, report);
    }
    if (!lenient_) {
        for (auto it = payload.begin(); it != payload.end(); ++it) {
            if (!def.find_field(it.key()))
                report.add(it.key(), "unknown_field", "field not in schema");
        }
    }
    return report;
}

namespace {

std::string canonical_value(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();  // minimal decimal for integers, canonical for the rest
}

}  // namespace

std::string idempotency_key(const json& payload, const SchemaDef& def, SimTime emitted_at) {
    // Keys are scoped per contract type so recipes that happen to share
    // values across schemas never collide in the delivery store.
    std::string bytes = def.oc_type;
    for (const auto& field : def.idempotency_recipe) {
        auto it = payload.find(field);
        if (it == payload.end())
            fail(Errc::missing_recipe_field, def.oc_type + " recipe field " + field + " missing");
        bytes.push_back('\x1f');
        bytes += canonical_value(*it);
    }
    SimTime bucket = emitted_at / (def.floor_seconds * 1000);
    bytes.push_back('\x1f');
    bytes += std::to_string(bucket);
    return sha256_hex(bytes);
}

std::string event_signing_bytes(const SignedEvent& ev) {
    json j;
    j["oc_type"] = ev.oc_type;
    j["schema_version"] = ev.schema_version;
    j["payload"] = ev.payload;
    j["idempotency_key"] = ev.idempotency_key;
    j["trace_id"] = ev.trace_id;
    j["mission_id"] = ev.mission_id;
    j["thread_id"] = ev.thread_id;
    j["emitted_at"] = ev.emitted_at;
    return j.dump();
}

json event_to_json(const SignedEvent& ev) {
    json j;
    j["oc_type"] = ev.oc_type;
    j["schema_version"] = ev.schema_version;
    j["payload"] = ev.payload;
    j["idempotency_key"] = ev.idempotency_key;
    j["trace_id"] = ev.trace_id;
    j["mission_id"] = ev.mission_id;
    j["thread_id"] = ev.thread_id;
    j["envelope"] = to_json(ev.envelope);
    j["signature"] = ev.signature_hex;
    j["producer"] = ev.producer;
    j["emitted_at"] = ev.emitted_at;
    return j;
}

SignedEvent event_from_json(const json& j) {
    SignedEvent ev;
    ev.oc_type = j.at("oc_type").get<std::string>();
    ev.schema_version = j.at("schema_version").get<int>();
    ev.payload = j.at("payload");
    ev.idempotency_key = j.at("idempotency_key").get<std::string>();
    ev.trace_id = j.at("trace_id").get<std::string>();
    ev.mission_id = j.at("mission_id").get<std::string>();
    ev.thread_id = j.at("thread_id").get<std::string>();
    ev.envelope = envelope_from_json(j.at("envelope"));
    ev.signature_hex = j.at("signature").get<std::string>();
    ev.producer = j.at("producer").get<std::string>();
    ev.emitted_at = j.at("emitted_at").get<SimTime>();
    return ev;
}

std::string canonical_event_bytes(const SignedEvent& ev) { return event_to_json(ev).dump(); }

SignedEvent EventSigner::sign(const json& payload, const std::string& oc_type, const Envelope& env,
                              const std::string& producer_spiffe, SimTime now) const {
    const auto* def = schemas_.find_latest(oc_type);
    if (!def) fail(Errc::unknown_schema, oc_type);
    auto report = schemas_.validate(payload, oc_type, def->version);
    if (!report.ok()) {
        std::string detail = oc_type + " payload invalid:";
        for (const auto& f : report.findings) detail += " [" + f.path + "] " + f.code + ";";
        fail(Errc::schema_violation, detail);
    }
    SignedEvent ev;
    ev.oc_type = oc_type;
    ev.schema_version = def->version;
    ev.payload = payload;
    ev.idempotency_key = idempotency_key(payload, *def, now);
    ev.trace_id = ids_.fresh("trace");
    ev.mission_id = env.mission_id;
    ev.thread_id = env.thread_id;
    ev.envelope = env;
    ev.producer = producer_spiffe;
    ev.emitted_at = now;
    auto [kid, sig] = identities_.sign(producer_spiffe, event_signing_bytes(ev), now);
    ev.envelope.provenance.signing_kid = kid;
    ev.signature_hex = sig;
    return ev;
}

Verdict verify_event(const SignedEvent& ev, const SchemaRegistry& schemas,
                     const IdentityRegistry& identities) {
    Verdict v;
    const auto* def = schemas.find(ev.oc_type, ev.schema_version);
    if (!def) {
        v.fail("SchemaViolation", ev.trace_id,
               "schema " + ev.oc_type + " v" + std::to_string(ev.schema_version) + " unknown");
    } else {
        auto report = schemas.validate(ev.payload, ev.oc_type, ev.schema_version);
        for (const auto& f : report.findings)
            v.fail("SchemaViolation", ev.trace_id, "[" + f.path + "] " + f.code);
    }

    bool sig_ok = identities.verify_with_kid(ev.envelope.provenance.signing_kid,
                                             event_signing_bytes(ev), ev.signature_hex,
                                             ev.emitted_at) &&
                  identities.key_belongs_to(ev.envelope.provenance.signing_kid, ev.producer) &&
                  ev.producer == ev.envelope.provenance.producer_spiffe;

    // Signing-time verification: revocation after emitted_at is a note.
    Verdict prov = identities.verify_provenance(ev.envelope.provenance, sig_ok, ev.emitted_at);
    for (std::size_t i = 0; i < prov.reason_codes.size(); ++i) {
        v.passed = false;
        v.reason_codes.push_back(prov.reason_codes[i]);
    }
    for (const auto& d : prov.details) v.details.push_back(d);
    for (const auto& n : prov.notes) v.notes.push_back(n);
    return v;
}

// --- schema (de)serialization ----------------------------------------------

json SchemaRegistry::to_json(const SchemaDef& def) {
    json j;
    j["oc_type"] = def.oc_type;
    j["version"] = def.version;
    j["fields"] = json::array();
    for (const auto& f : def.fields) {
        json e;
        e["name"] = f.name;
        e["type"] = field_kind_name(f.kind);
        e["required"] = f.required;
        if (f.kind == FieldKind::enum_field || (f.kind == FieldKind::list_field && !f.enum_values.empty()))
            e["values"] = f.enum_values;
        if (f.kind == FieldKind::list_field) e["element"] = field_kind_name(f.element);
        if (f.min_value) e["min"] = *f.min_value;
        if (f.max_value) e["max"] = *f.max_value;
        if (!f.pattern.empty()) e["pattern"] = f.pattern;
        j["fields"].push_back(std::move(e));
    }
    if (!def.ordering_key_field.empty()) j["ordering_key_field"] = def.ordering_key_field;
    j["idempotency_recipe"] = def.idempotency_recipe;
    j["floor_seconds"] = def.floor_seconds;
    j["state_changing"] = def.state_changing;
    j["retention_class"] =
        def.retention == RetentionClass::audit_long ? "audit-long" : "operational";
    if (!def.target_asset_fields.empty()) j["target_asset_fields"] = def.target_asset_fields;
    return j;
}

SchemaDef SchemaRegistry::schema_from_json(const json& j) {
    SchemaDef def;
    def.oc_type = j.at("oc_type").get<std::string>();
    def.version = j.at("version").get<int>();
    for (const auto& e : j.at("fields")) {
        FieldSpec f;
        f.name = e.at("name").get<std::string>();
        f.kind = field_kind_from(e.at("type").get<std::string>());
        f.required = e.at("required").get<bool>();
        if (e.contains("values")) f.enum_values = e.at("values").get<std::vector<std::string>>();
        if (e.contains("element")) f.element = field_kind_from(e.at("element").get<std::string>());
        if (e.contains("min")) f.min_value = e.at("min").get<double>();
        if (e.contains("max")) f.max_value = e.at("max").get<double>();
        if (e.contains("pattern")) f.pattern = e.at("pattern").get<std::string>();
        def.fields.push_back(std::move(f));
    }
    if (j.contains("ordering_key_field"))
        def.ordering_key_field = j.at("ordering_key_field").get<std::string>();
    def.idempotency_recipe = j.at("idempotency_recipe").get<std::vector<std::string>>();
    def.floor_seconds = j.at("floor_seconds").get<std::int64_t>();
    def.state_changing = j.at("state_changing").get<bool>();
    def.retention = j.at("retention_class").get<std::string>() == "audit-long"
                        ? RetentionClass::audit_long
                        : RetentionClass::operational;
    if (j.contains("target_asset_fields"))
        def.target_asset_fields = j.at("target_asset_fields").get<std::vector<std::string>>();
    return def;
}

}  // namespace aegis
