#include "aegis/common.hpp"

namespace aegis {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::empty_identifier: return "EmptyIdentifier";
        case Errc::no_cosign_constraint: return "NoCosignConstraint";
        case Errc::bad_approval_signature: return "BadApprovalSignature";
        case Errc::duplicate_approval: return "DuplicateApproval";
        case Errc::duplicate_identity: return "DuplicateIdentity";
        case Errc::unknown_identity: return "UnknownIdentity";
        case Errc::revoked_identity: return "RevokedIdentity";
        case Errc::unknown_key: return "UnknownKey";
        case Errc::stale_attestation: return "StaleAttestation";
        case Errc::duplicate_schema: return "DuplicateSchema";
        case Errc::malformed_schema: return "MalformedSchema";
        case Errc::unknown_schema: return "UnknownSchema";
        case Errc::missing_recipe_field: return "MissingRecipeField";
        case Errc::schema_violation: return "SchemaViolation";
        case Errc::duplicate_node: return "DuplicateNode";
        case Errc::unknown_node: return "UnknownNode";
        case Errc::not_an_action: return "NotAnAction";
        case Errc::unknown_asset: return "UnknownAsset";
        case Errc::parse_error: return "ParseError";
        case Errc::schema_mismatch: return "SchemaMismatch";
        case Errc::lifecycle_blocked: return "LifecycleBlocked";
        case Errc::readonly_violation: return "ReadOnlyViolation";
        case Errc::timebox_exceeded: return "TimeboxExceeded";
        case Errc::postcheck_failure: return "PostCheckFailure";
        case Errc::verification_failed: return "VerificationFailed";
        case Errc::no_route: return "NoRoute";
        case Errc::unknown_pending: return "UnknownPending";
        case Errc::wrong_role: return "WrongRole";
        case Errc::invalid_event: return "InvalidEvent";
        case Errc::no_matching_role: return "NoMatchingRole";
        case Errc::empty_window: return "EmptyWindow";
        case Errc::empty_category: return "EmptyCategory";
        case Errc::config_error: return "ConfigError";
        case Errc::unknown_target: return "UnknownTarget";
    }
    return "UnknownError";
}

std::string to_hex(const std::string& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xF]);
    }
    return out;
}

std::string from_hex(const std::string& hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0) fail(Errc::parse_error, "odd-length hex string");
    std::string out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = nibble(hex[i]), lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) fail(Errc::parse_error, "bad hex digit");
        out.push_back(static_cast<char>((hi << 4) | lo));
    }
    return out;
}

}  // namespace aegis
