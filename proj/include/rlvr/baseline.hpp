#pragma once

// Per-prompt Beta(alpha, beta) tracker for Bernoulli rewards. The mean
// alpha/(alpha+beta) is the baseline; updates discount the shape parameters
// by eta before adding the new observation. prev_mean records the mean that
// was current before the latest update, so the advantage can always reach
// the estimate that predates the reward it is scored against.

#include <cstdint>
#include <map>

#include "rlvr/errors.hpp"

namespace rlvr {

class BetaTracker {
public:
    struct Entry {
        double alpha = 0.0;
        double beta = 0.0;
        double prev_mean = 0.0;
    };

    BetaTracker() = default;

    // initial_values maps prompt id -> v0, the pre-training success estimate
    // for that prompt. alpha0 + beta0 = 1 / (1 - eta_min) exactly.
    static BetaTracker init(const std::map<int, double>& initial_values,
                            double eta_min) {
        if (!(eta_min > 0.0 && eta_min < 1.0))
            throw ConfigError("eta_min must be in (0, 1)");
        BetaTracker t;
        const double mass = 1.0 / (1.0 - eta_min);
        for (const auto& [id, v0] : initial_values) {
            if (!(v0 >= 0.0 && v0 <= 1.0))
                throw ConfigError("initial estimate must be in [0, 1]");
            t.entries_[id] = Entry{v0 * mass, (1.0 - v0) * mass, v0};
        }
        return t;
    }

    double mean(int id) const {
        const Entry& e = at(id);
        return e.alpha / (e.alpha + e.beta);
    }

    double previous_mean(int id) const { return at(id).prev_mean; }

    void update(int id, int reward, double eta) {
        if (reward != 0 && reward != 1)
            throw UsageError("reward must be 0 or 1");
        if (!(eta > 0.0 && eta <= 1.0))
            throw UsageError("eta must be in (0, 1]");
        Entry& e = mutable_at(id);
        e.prev_mean = e.alpha / (e.alpha + e.beta);
        e.alpha = eta * e.alpha + reward;
        e.beta = eta * e.beta + (1 - reward);
    }

    bool contains(int id) const { return entries_.count(id) != 0; }
    std::size_t size() const { return entries_.size(); }
    const std::map<int, Entry>& entries() const { return entries_; }

    // Checkpoint restore path.
    void set_entry(int id, const Entry& e) { entries_[id] = e; }

private:
    const Entry& at(int id) const {
        auto it = entries_.find(id);
        if (it == entries_.end()) throw UsageError("unknown prompt id in tracker");
        return it->second;
    }
    Entry& mutable_at(int id) {
        auto it = entries_.find(id);
        if (it == entries_.end()) throw UsageError("unknown prompt id in tracker");
        return it->second;
    }

    std::map<int, Entry> entries_;
};

// Free-function spellings matching the rest of the API.
inline BetaTracker init_tracker(const std::map<int, double>& initial_values,
                                double eta_min) {
    return BetaTracker::init(initial_values, eta_min);
}

}  // namespace rlvr
