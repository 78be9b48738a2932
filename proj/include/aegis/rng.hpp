#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "aegis/common.hpp"

namespace aegis {

// Counter-based seeded generator with independent named streams. Stream
// state is derived from (seed, stream name) only, so adding a stream never
// perturbs the draws of another. splitmix64 core; portable across
// platforms and compilers (no std:: distributions).
class RngStream {
public:
    RngStream() : RngStream(0, "default") {}
    RngStream(std::uint64_t seed, std::string_view name);

    std::uint64_t next_u64();

    // Uniform real in [0, 1), 53-bit resolution.
    double next_real();

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n);

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Bernoulli draw.
    bool chance(double p);

    // Exponential with the given mean (> 0); used for arrival processes.
    double exponential(double mean);

    const std::string& name() const { return name_; }

private:
    std::uint64_t state_;
    std::string name_;
};

// Deterministic identifier source: "<prefix>-<32 hex chars>" from a
// dedicated stream, collision-free at desk scale.
class IdSource {
public:
    IdSource() : stream_(0, "ids") {}
    explicit IdSource(std::uint64_t seed) : stream_(seed, "ids") {}

    std::string fresh(std::string_view prefix);

private:
    RngStream stream_;
};

}  // namespace aegis
