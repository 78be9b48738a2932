#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aegis {

// Simulated time in milliseconds since scenario start. The discrete-event
// clock is the only time source anywhere in the kernel; nothing reads wall
// time.
using SimTime = std::int64_t;

inline constexpr SimTime kNever = INT64_MAX;

enum class Errc {
    empty_identifier,
    no_cosign_constraint,
    bad_approval_signature,
    duplicate_approval,
    duplicate_identity,
    unknown_identity,
    revoked_identity,
    unknown_key,
    stale_attestation,
    duplicate_schema,
    malformed_schema,
    unknown_schema,
    missing_recipe_field,
    schema_violation,
    duplicate_node,
    unknown_node,
    not_an_action,
    unknown_asset,
    parse_error,
    schema_mismatch,
    lifecycle_blocked,
    readonly_violation,
    timebox_exceeded,
    postcheck_failure,
    verification_failed,
    no_route,
    unknown_pending,
    wrong_role,
    invalid_event,
    no_matching_role,
    empty_window,
    empty_category,
    config_error,
    unknown_target,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

// Shared pass/fail result for provenance, invariant, and event checks.
// `passed` is true exactly when `reason_codes` is empty; informational
// findings that must not flip the verdict (VacuousPass, revoked-after-
// signing) go into `notes`.
struct Verdict {
    bool passed = true;
    std::vector<std::string> reason_codes;
    std::vector<std::pair<std::string, std::string>> details;  // (subject, message)
    std::vector<std::string> notes;

    void fail(const std::string& code, const std::string& subject, const std::string& message) {
        passed = false;
        reason_codes.push_back(code);
        details.emplace_back(subject, message);
    }

    void note(const std::string& code, const std::string& subject, const std::string& message) {
        notes.push_back(code);
        details.emplace_back(subject, message);
    }

    bool has_reason(const std::string& code) const {
        for (const auto& r : reason_codes)
            if (r == code) return true;
        return false;
    }

    bool has_note(const std::string& code) const {
        for (const auto& n : notes)
            if (n == code) return true;
        return false;
    }
};

std::string to_hex(const std::string& bytes);
std::string from_hex(const std::string& hex);  // throws Errc::parse_error on odd/bad input

}  // namespace aegis
