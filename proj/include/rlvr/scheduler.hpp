#pragma once

// Adaptive discount factor for the Beta tracker. A sliding window tracks the
// KL between consecutive policy updates; eta is recomputed from the window
// mean with a linear decay rule above the target and a linear growth rule at
// or below it. Note the decay branch is constant: mean > target forces the
// ratio clamp to 1, so any overshoot lands exactly on eta_min.

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "rlvr/errors.hpp"

namespace rlvr {

class EtaScheduler {
public:
    EtaScheduler(double eta_min, double eta_max, int window, double kl_target)
        : eta_min_(eta_min), eta_max_(eta_max), capacity_(window),
          kl_target_(kl_target) {
        if (!(eta_min > 0.0 && eta_min <= eta_max && eta_max <= 1.0))
            throw ConfigError("need 0 < eta_min <= eta_max <= 1");
        if (window < 1) throw ConfigError("window size must be >= 1");
        if (!(kl_target > 0.0)) throw ConfigError("kl_target must be > 0");
        current_eta_ = 0.5 * (eta_min_ + eta_max_);
    }

    void record_kl(double kl) {
        if (!(kl >= 0.0) || !std::isfinite(kl))
            throw UsageError("recorded KL must be finite and >= 0");
        window_.push_back(kl);
        if (static_cast<int>(window_.size()) > capacity_) window_.pop_front();
        recompute();
    }

    double current_eta() const { return current_eta_; }

    double window_mean() const {
        if (window_.empty()) return 0.0;
        return std::accumulate(window_.begin(), window_.end(), 0.0) /
               static_cast<double>(window_.size());
    }

    int window_size() const { return static_cast<int>(window_.size()); }
    int capacity() const { return capacity_; }
    double eta_min() const { return eta_min_; }
    double eta_max() const { return eta_max_; }
    double kl_target() const { return kl_target_; }
    const std::deque<double>& window() const { return window_; }

    // Checkpoint restore path.
    void restore(const std::deque<double>& window, double eta) {
        window_ = window;
        while (static_cast<int>(window_.size()) > capacity_) window_.pop_front();
        current_eta_ = std::clamp(eta, eta_min_, eta_max_);
    }

private:
    void recompute() {
        const double mean = window_mean();
        double eta;
        if (mean > kl_target_) {
            const double tau = std::min(mean / kl_target_, 1.0);
            eta = eta_max_ - tau * (eta_max_ - eta_min_);
        } else {
            const double tau = mean / kl_target_;
            eta = eta_min_ + tau * (eta_max_ - eta_min_);
        }
        current_eta_ = std::clamp(eta, eta_min_, eta_max_);
    }

    std::deque<double> window_;
    double eta_min_;
    double eta_max_;
    int capacity_;
    double kl_target_;
    double current_eta_;
};

}  // namespace rlvr
