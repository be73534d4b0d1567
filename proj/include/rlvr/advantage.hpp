#pragma once

// Advantage estimators: group-normalized (GRPO), leave-one-out (RLOO),
// batch normalization (REINFORCE++ single-rollout mode and the group-free
// pipeline), reward-minus-baseline, and entropy-based shaping. All pure
// functions over value inputs.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rlvr/errors.hpp"

namespace rlvr {

namespace detail {

inline bool all_equal(std::span<const double> xs) {
    for (double x : xs)
        if (x != xs.front()) return false;
    return true;
}

inline std::vector<double> center_scale(std::span<const double> xs, double eps_std) {
    const std::size_t n = xs.size();
    if (detail::all_equal(xs)) return std::vector<double>(n, 0.0);
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    const double std_dev = std::sqrt(var / static_cast<double>(n));  // population
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (xs[i] - mean) / (std_dev + eps_std);
    return out;
}

}  // namespace detail

// A_i = (r_i - mean) / (std + eps_std), population std over the group.
// All-equal rewards give all-zero advantages.
inline std::vector<double> grpo_advantages(std::span<const double> rewards,
                                           double eps_std) {
    if (rewards.size() < 2) throw UsageError("group size must be >= 2");
    return detail::center_scale(rewards, eps_std);
}

// A_i = r_i - mean of the other rewards in the group.
inline std::vector<double> rloo_advantages(std::span<const double> rewards) {
    const std::size_t g = rewards.size();
    if (g < 2) throw UsageError("group size must be >= 2");
    double sum = 0.0;
    for (double r : rewards) sum += r;
    std::vector<double> out(g);
    for (std::size_t i = 0; i < g; ++i)
        out[i] = rewards[i] - (sum - rewards[i]) / static_cast<double>(g - 1);
    return out;
}

// Center and scale across the whole batch.
inline std::vector<double> batch_normalize(std::span<const double> values,
                                           double eps_std) {
    if (values.size() < 2) throw UsageError("batch size must be >= 2");
    return detail::center_scale(values, eps_std);
}

// A = r - baseline from the previous step.
inline double single_rollout_advantage(int reward, double baseline_prev) {
    if (reward != 0 && reward != 1) throw UsageError("reward must be 0 or 1");
    if (!(baseline_prev >= 0.0 && baseline_prev <= 1.0))
        throw UsageError("baseline must be in [0, 1]");
    return static_cast<double>(reward) - baseline_prev;
}

// psi_t = min(|A_t| / gamma, lambda * H_t), with the entropies treated as
// constants. cap_bonus optionally limits psi_t to |A_t| so shaping can never
// flip the sign of a negative advantage (off by default).
inline std::vector<double> entropy_bonus(std::span<const double> advantages,
                                         std::span<const double> entropies,
                                         double gamma, double lambda,
                                         bool cap_bonus = false) {
    if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (advantages.size() != entropies.size())
        throw UsageError("advantage/entropy length mismatch");
    std::vector<double> psi(advantages.size());
    for (std::size_t t = 0; t < advantages.size(); ++t) {
        if (!(entropies[t] >= 0.0)) throw UsageError("entropy must be >= 0");
        double b = std::min(std::abs(advantages[t]) / gamma, lambda * entropies[t]);
        if (cap_bonus) b = std::min(b, std::abs(advantages[t]));
        psi[t] = b;
    }
    return psi;
}

// Shaped advantage per token: A_t + psi_t.
inline std::vector<double> entropy_shape(std::span<const double> advantages,
                                         std::span<const double> entropies,
                                         double gamma, double lambda,
                                         bool cap_bonus = false) {
    const auto psi = entropy_bonus(advantages, entropies, gamma, lambda, cap_bonus);
    std::vector<double> shaped(advantages.size());
    for (std::size_t t = 0; t < advantages.size(); ++t)
        shaped[t] = advantages[t] + psi[t];
    return shaped;
}

// Per-batch advantages: one sequence-level value per rollout, broadcast to a
// per-token row, optionally reshaped by the entropy bonus.
struct AdvantageBatch {
    std::vector<double> sequence;               // one per rollout
    std::vector<std::vector<double>> shaped;    // per rollout, per token
    std::vector<std::vector<double>> bonus;     // psi, zeros when not shaping
    bool shaping_applied = false;
};

}  // namespace rlvr
