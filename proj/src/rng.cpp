#include "aegis/rng.hpp"

#include <cmath>

namespace aegis {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t splitmix(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string_view name) : name_(name) {
    state_ = seed ^ fnv1a(name);
    // Decorrelate streams whose (seed ^ hash) happen to be close.
    splitmix(state_);
    splitmix(state_);
}

std::uint64_t RngStream::next_u64() { return splitmix(state_); }

double RngStream::next_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
    // Modulo bias is irrelevant at desk scale; determinism is what matters.
    return next_u64() % n;
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
}

bool RngStream::chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return next_real() < p;
}

double RngStream::exponential(double mean) {
    double u = next_real();
    // Guard the log; next_real() < 1 always, but u == 0 is possible.
    if (u <= 0.0) u = 0x1.0p-53;
    return -mean * std::log(u);
}

std::string IdSource::fresh(std::string_view prefix) {
    static const char* digits = "0123456789abcdef";
    std::string out(prefix);
    out.push_back('-');
    for (int half = 0; half < 2; ++half) {
        std::uint64_t v = stream_.next_u64();
        for (int i = 15; i >= 0; --i) out.push_back(digits[(v >> (4 * i)) & 0xF]);
    }
    return out;
}

}  // namespace aegis
