#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace aegis {

// FIPS 180-4 SHA-256 over arbitrary bytes. Returns 32 raw bytes.
std::string sha256(std::string_view data);

// Convenience: lowercase hex digest.
std::string sha256_hex(std::string_view data);

// RFC 2104 HMAC-SHA-256. Keys of any length; returns 32 raw bytes.
std::string hmac_sha256(std::string_view key, std::string_view data);

std::string hmac_sha256_hex(std::string_view key, std::string_view data);

}  // namespace aegis
