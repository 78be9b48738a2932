#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "aegis/common.hpp"

namespace aegis {

// Deterministic discrete-event clock. Events fire in (fire_at, sequence)
// order, so ties dispatch in scheduling order; now() never decreases. This
// is the only time source in the kernel.
class SimClock {
public:
    using Callback = std::function<void()>;

    SimTime now() const { return now_; }

    void schedule(SimTime at, Callback fn) {
        if (at < now_) at = now_;
        queue_.push(Entry{at, next_seq_++, std::move(fn)});
    }

    void schedule_in(SimTime delay, Callback fn) { schedule(now_ + delay, std::move(fn)); }

    bool empty() const { return queue_.empty(); }

    // Dispatches the next event; returns false when the queue is drained.
    bool step() {
        if (queue_.empty()) return false;
        Entry e = queue_.top();
        queue_.pop();
        now_ = e.at;
        e.fn();
        return true;
    }

    // Runs everything scheduled at or before `until` (inclusive), then
    // advances now() to `until`.
    void run_until(SimTime until) {
        while (!queue_.empty() && queue_.top().at <= until) step();
        if (now_ < until) now_ = until;
    }

    void run_all() {
        while (step()) {
        }
    }

private:
    struct Entry {
        SimTime at;
        std::uint64_t seq;
        Callback fn;

        bool operator>(const Entry& other) const {
            if (at != other.at) return at > other.at;
            return seq > other.seq;
        }
    };

    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
};

}  // namespace aegis
