#pragma once

// Verification suites behind the `check` subcommand: finite-difference
// agreement for every analytic gradient (including the full training-step
// loss), enumeration self-consistency, baseline invariance, and the
// Monte-Carlo estimator bias report. Results are structured for CI.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlvr/oracle.hpp"
#include "rlvr/trainer.hpp"

namespace rlvr {

struct CheckResult {
    std::string name;
    bool pass = false;
    double value = 0.0;      // the measured quantity (usually max rel. error)
    double threshold = 0.0;  // what it must stay below
    std::string detail;
};

inline nlohmann::json checks_to_json(const std::vector<CheckResult>& checks) {
    nlohmann::json j;
    j["checks"] = nlohmann::json::array();
    bool all = true;
    for (const auto& c : checks) {
        nlohmann::json e;
        e["name"] = c.name;
        e["pass"] = c.pass;
        e["value"] = c.value;
        e["threshold"] = c.threshold;
        if (!c.detail.empty()) e["detail"] = c.detail;
        j["checks"].push_back(e);
        all = all && c.pass;
    }
    j["pass"] = all;
    return j;
}

// Miniature setup used by every FD and enumeration check: small enough to
// enumerate (3^2 outcomes) and to difference every coordinate quickly.
inline TrainConfig miniature_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.algo = Algo::kMssr;
    cfg.prompts_per_step = 4;
    cfg.rollouts_per_prompt = 1;
    cfg.steps = 2;
    cfg.kl_ref_coef = 0.02;
    cfg.entropy_loss_coef = 0.015;
    cfg.optim.lr = 1e-3;
    cfg.policy = PolicyConfig{4, 6, 0.5};
    cfg.task = TaskConfig{3, 2, 4, 2, 8, Difficulty::kEasy, seed};
    cfg.val_fraction = 0.25;
    cfg.seed = seed;
    return cfg;
}

namespace detail {

inline Prompt random_prompt(const PolicyDims& dims, std::uint64_t seed) {
    TaskConfig tc{dims.vocab, dims.max_len, dims.d_ctx,
                  std::min(2, dims.d_ctx), 4, Difficulty::kEasy, seed};
    return make_task_suite(tc).prompts.front();
}

inline std::vector<int> random_tokens(const PolicyDims& dims, Rng& rng) {
    std::vector<int> toks(dims.max_len);
    for (int& t : toks)
        t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(dims.vocab)));
    return toks;
}

}  // namespace detail

// FD agreement for the three policy-gradient building blocks plus the full
// training-step loss (surrogate + regularizers), across n_seeds seeds.
inline std::vector<CheckResult> gradient_checks(int n_seeds = 5, double h = 1e-5,
                                                double tol = 1e-4) {
    std::vector<CheckResult> out;
    const PolicyDims dims{3, 2, 4, 4, 6};

    double worst_logprob = 0.0, worst_kl = 0.0, worst_ent = 0.0, worst_step = 0.0,
           worst_xm = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
        const std::uint64_t seed = 101 + static_cast<std::uint64_t>(s);
        const PolicyParams params = init_params(dims, seed, 0.5);
        const PolicyParams other = init_params(dims, seed + 1000, 0.5);
        const Prompt prompt = detail::random_prompt(dims, seed);
        Rng rng = make_stream(seed, 0xC0FFEE);
        const auto tokens = detail::random_tokens(dims, rng);

        std::vector<double> weights(dims.max_len);
        for (double& w : weights) w = rng.normal();

        const auto g_lp = backprop_weighted_logprob(params, prompt, tokens, weights);
        const auto fd_lp = finite_diff_grad(
            [&](const PolicyParams& p) {
                const auto [lp, ent] = logprobs_and_entropy(p, prompt, tokens);
                double v = 0.0;
                for (std::size_t t = 0; t < lp.size(); ++t) v += weights[t] * lp[t];
                return v;
            },
            params, h);
        worst_logprob = std::max(worst_logprob, max_relative_error(g_lp, fd_lp));

        const auto [klv, g_kl] = backprop_kl(params, other, prompt, tokens);
        const auto fd_kl = finite_diff_grad(
            [&](const PolicyParams& p) { return kl_value(p, other, prompt, tokens); },
            params, h);
        (void)klv;
        worst_kl = std::max(worst_kl, max_relative_error(g_kl, fd_kl));

        const auto [entv, g_ent] = backprop_entropy(params, prompt, tokens);
        const auto fd_ent = finite_diff_grad(
            [&](const PolicyParams& p) {
                return backprop_entropy(p, prompt, tokens).first;
            },
            params, h);
        (void)entv;
        worst_ent = std::max(worst_ent, max_relative_error(g_ent, fd_ent));

        // Full step loss with every regularizer active, at the snapshot point.
        TrainConfig cfg = miniature_config(seed);
        Trainer trainer(cfg);
        BatchData batch = trainer.collect_batch(1);
        trainer.compute_advantages(batch);
        const PolicyParams theta0 = trainer.params();
        const auto [parts, g_step] = trainer.loss_and_grad(theta0, theta0, batch);
        (void)parts;
        const auto fd_step = finite_diff_grad(
            [&](const PolicyParams& p) {
                return trainer.step_loss(p, theta0, batch).loss;
            },
            theta0, h);
        worst_step = std::max(worst_step, max_relative_error(g_step, fd_step));

        // Cross-modal variant: anchor branch must behave as a constant.
        TrainConfig cfg_xm = miniature_config(seed);
        cfg_xm.crossmodal_coef = 0.02;
        Trainer trainer_xm(cfg_xm);
        BatchData batch_xm = trainer_xm.collect_batch(1);
        trainer_xm.compute_advantages(batch_xm);
        const PolicyParams theta_xm = trainer_xm.params();
        const auto [parts_xm, g_xm] = trainer_xm.loss_and_grad(theta_xm, theta_xm, batch_xm);
        (void)parts_xm;
        const auto fd_xm = finite_diff_grad(
            [&](const PolicyParams& p) {
                return trainer_xm.step_loss(p, theta_xm, batch_xm).loss;
            },
            theta_xm, h);
        worst_xm = std::max(worst_xm, max_relative_error(g_xm, fd_xm));
    }

    out.push_back({"grad_weighted_logprob_vs_fd", worst_logprob < tol, worst_logprob,
                   tol, ""});
    out.push_back({"grad_kl_vs_fd", worst_kl < tol, worst_kl, tol, ""});
    out.push_back({"grad_entropy_vs_fd", worst_ent < tol, worst_ent, tol, ""});
    out.push_back({"grad_train_step_loss_vs_fd", worst_step < tol, worst_step, tol,
                   ""});
    out.push_back({"grad_train_step_loss_crossmodal_vs_fd", worst_xm < tol, worst_xm,
                   tol, ""});
    return out;
}

// Enumerated gradient vs finite differences of enumerated J, probability
// mass, and baseline invariance of the score-function gradient.
inline std::vector<CheckResult> enumeration_checks(double h = 1e-5,
                                                   double tol = 1e-4) {
    std::vector<CheckResult> out;
    const PolicyDims dims{3, 2, 4, 4, 6};
    const PolicyParams params = init_params(dims, 42, 0.5);
    const Prompt prompt = detail::random_prompt(dims, 42);

    const auto rep = enumerate_outcomes(params, prompt);
    out.push_back({"enumerated_probability_mass",
                   std::abs(rep.probability_mass - 1.0) < 1e-10,
                   std::abs(rep.probability_mass - 1.0), 1e-10, ""});

    const auto fd = finite_diff_grad(
        [&](const PolicyParams& p) { return enumerate_expected_reward(p, prompt); },
        params, h);
    const double rel = max_relative_error(rep.gradient, fd);
    out.push_back({"enumerated_gradient_vs_fd_of_J", rel < tol, rel, tol, ""});

    // sum_o pi(o)(r(o) - b) grad log pi(o) must not depend on b.
    double worst_b = 0.0;
    std::vector<double> g_b0;
    for (const double b : {0.0, 0.5, 1.0}) {
        std::vector<double> g(params.dims.total(), 0.0);
        const std::vector<double> ones(dims.max_len, 1.0);
        detail::for_each_outcome(
            params, prompt, [&](std::span<const int> seq, double p) {
                const double w = (verify(prompt, seq) - b) * p;
                const auto gl = backprop_weighted_logprob(params, prompt, seq, ones);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += w * gl[i];
            });
        if (b == 0.0) {
            g_b0 = g;
        } else {
            worst_b = std::max(worst_b, max_relative_error(g, g_b0, 1e-4));
        }
    }
    out.push_back({"baseline_invariance_b_0_0.5_1", worst_b < 1e-8, worst_b, 1e-8, ""});
    return out;
}

// Monte-Carlo gradient estimates against enumerated ground truth: the fixed
// baseline must pass, the reward-leaking control must fail.
inline std::vector<CheckResult> bias_checks(int samples = 50000,
                                            std::uint64_t seed = 7) {
    std::vector<CheckResult> out;
    const TrainConfig cfg = miniature_config(seed);
    TaskSuite suite = make_task_suite(cfg.task);
    suite.prompts.resize(4);
    const PolicyDims dims{cfg.task.vocab, cfg.task.max_len, cfg.task.d_ctx,
                          cfg.policy.d_emb, cfg.policy.d_hid};
    const PolicyParams params = init_params(dims, seed, 0.5);

    const auto good = estimator_bias_check(EstimatorKind::kReinforceFixedBaseline,
                                           params, suite, samples, seed, 0.5);
    out.push_back({"reinforce_fixed_baseline_unbiased", good.pass, good.max_abs_z, 3.0,
                   "max |z| over coordinates, " + std::to_string(samples) +
                       " samples"});

    const auto leaky = estimator_bias_check(EstimatorKind::kLeakyBaseline, params,
                                            suite, samples, seed, 0.5, 0.5);
    out.push_back({"leaky_baseline_detected_biased", !leaky.pass, leaky.max_abs_z, 3.0,
                   "negative control; must exceed the threshold"});
    return out;
}

inline nlohmann::json run_all_checks(int bias_samples = 50000,
                                     std::uint64_t bias_seed = 7) {
    std::vector<CheckResult> all;
    for (auto& c : gradient_checks()) all.push_back(std::move(c));
    for (auto& c : enumeration_checks()) all.push_back(std::move(c));
    for (auto& c : bias_checks(bias_samples, bias_seed)) all.push_back(std::move(c));
    return checks_to_json(all);
}

}  // namespace rlvr
