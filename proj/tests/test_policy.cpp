#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rlvr/env.hpp"
#include "rlvr/oracle.hpp"
#include "rlvr/policy.hpp"
#include "rlvr/rng.hpp"

using namespace rlvr;

namespace {

Prompt unit_prompt(int d_ctx, double value = 1.0) {
    Prompt p;
    p.id = 0;
    p.context.assign(d_ctx, 0.0);
    p.context[0] = value;
    p.answer = 0;
    return p;
}

// One-hidden-unit policy whose logits are directly programmable: with
// context (1.0), h = (tanh(1)) and z_v = head[v] * tanh(1).
PolicyParams programmable_logits(int vocab, const std::vector<double>& logits) {
    PolicyDims dims{vocab, 1, 1, 1, 1};
    PolicyParams params{dims, std::vector<double>(dims.total(), 0.0)};
    params.w[dims.ctxp_off()] = 1.0;  // h = tanh(1 * context[0])
    const double scale = 1.0 / std::tanh(1.0);
    for (int v = 0; v < vocab; ++v)
        params.w[dims.head_off() + v] = logits[v] * scale;
    return params;
}

Prompt random_prompt(const PolicyDims& dims, std::uint64_t seed) {
    TaskConfig tc{dims.vocab, dims.max_len, dims.d_ctx, 1, 2,
                  Difficulty::kCollapseProne, seed};
    return make_task_suite(tc).prompts.front();
}

}  // namespace

TEST_CASE("init is deterministic and near-uniform") {
    const PolicyDims dims{8, 4, 16, 16, 32};
    const PolicyParams a = init_params(dims, 7);
    const PolicyParams b = init_params(dims, 7);
    REQUIRE(a.w == b.w);
    const PolicyParams c = init_params(dims, 8);
    REQUIRE(a.w != c.w);

    // mean initial entropy >= 0.9 ln V
    const Prompt p = random_prompt(dims, 5);
    Rng rng = make_stream(1, stream::kRollout);
    const Rollout r = sample_rollout(a, p, rng);
    double mean_ent = 0.0;
    for (double h : r.entropies_old) mean_ent += h;
    mean_ent /= static_cast<double>(r.entropies_old.size());
    REQUIRE(mean_ent >= 0.9 * std::log(8.0));
}

TEST_CASE("zero-scale init gives exactly uniform distributions") {
    const PolicyDims dims{4, 3, 6, 4, 5};
    const PolicyParams params = init_params(dims, 3, 0.0);
    const Prompt p = random_prompt(dims, 3);
    const auto dist = next_token_dist(params, p, std::vector<int>{});
    for (double q : dist) REQUIRE(q == Catch::Approx(0.25).margin(1e-15));
    const auto [lp, ent] = logprobs_and_entropy(params, p, std::vector<int>{0, 1, 2});
    for (double h : ent) REQUIRE(h == Catch::Approx(std::log(4.0)).margin(1e-12));
    for (double l : lp) REQUIRE(l == Catch::Approx(std::log(0.25)).margin(1e-12));
}

TEST_CASE("distributions normalize to one") {
    const PolicyDims dims{5, 4, 8, 6, 7};
    const PolicyParams params = init_params(dims, 11, 0.8);
    const Prompt p = random_prompt(dims, 11);
    std::vector<int> prefix;
    for (int t = 0; t < dims.max_len; ++t) {
        const auto dist = next_token_dist(params, p, prefix);
        double sum = 0.0;
        for (double q : dist) {
            REQUIRE(q > 0.0);
            sum += q;
        }
        REQUIRE(std::abs(sum - 1.0) < 1e-12);
        prefix.push_back(t % dims.vocab);
    }
}

TEST_CASE("hand softmax: logits (0, 0, ln 2) give (0.25, 0.25, 0.5)") {
    const PolicyParams params = programmable_logits(3, {0.0, 0.0, std::log(2.0)});
    const Prompt p = unit_prompt(1);
    const auto dist = next_token_dist(params, p, std::vector<int>{});
    REQUIRE(dist[0] == Catch::Approx(0.25).epsilon(1e-12));
    REQUIRE(dist[1] == Catch::Approx(0.25).epsilon(1e-12));
    REQUIRE(dist[2] == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("hand entropy of (0.25, 0.25, 0.5)") {
    const PolicyParams params = programmable_logits(3, {0.0, 0.0, std::log(2.0)});
    const Prompt p = unit_prompt(1);
    const auto [lp, ent] = logprobs_and_entropy(params, p, std::vector<int>{2});
    REQUIRE(ent[0] == Catch::Approx(1.0397207708399179).epsilon(1e-12));
    REQUIRE(lp[0] == Catch::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("near-deterministic distribution samples its mode") {
    const PolicyParams params = programmable_logits(3, {0.0, 0.0, 50.0});
    const Prompt p = unit_prompt(1);
    Rng rng = make_stream(4, stream::kRollout);
    const Rollout r = sample_rollout(params, p, rng);
    REQUIRE(r.tokens[0] == 2);
    REQUIRE(std::abs(r.logprobs_old[0]) < 1e-9);
    REQUIRE(r.entropies_old[0] < 1e-9);
}

TEST_CASE("recorded sampling data matches recomputation") {
    const PolicyDims dims{6, 4, 8, 5, 7};
    const PolicyParams params = init_params(dims, 21, 0.6);
    const Prompt p = random_prompt(dims, 21);
    Rng rng = make_stream(5, stream::kRollout, 0, 3);
    const Rollout r = sample_rollout(params, p, rng);
    const auto [lp, ent] = logprobs_and_entropy(params, p, r.tokens);
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
        REQUIRE(r.logprobs_old[t] == lp[t]);
        REQUIRE(r.entropies_old[t] == ent[t]);
        REQUIRE(r.logprobs_old[t] <= 0.0);
        REQUIRE(r.entropies_old[t] >= 0.0);
        REQUIRE(r.entropies_old[t] <= std::log(static_cast<double>(dims.vocab)));
    }

    Rng rng2 = make_stream(5, stream::kRollout, 0, 3);
    const Rollout r2 = sample_rollout(params, p, rng2);
    REQUIRE(r2.tokens == r.tokens);
    REQUIRE(r2.logprobs_old == r.logprobs_old);
}

TEST_CASE("uniform policy has per-token entropy ln V") {
    const PolicyDims dims{4, 2, 3, 2, 2};
    const PolicyParams params = init_params(dims, 1, 0.0);
    const Prompt p = random_prompt(dims, 1);
    Rng rng = make_stream(6, stream::kRollout);
    const Rollout r = sample_rollout(params, p, rng);
    for (double h : r.entropies_old)
        REQUIRE(h == Catch::Approx(std::log(4.0)).margin(1e-12));
}

TEST_CASE("weighted logprob gradient: zeros, linearity, FD agreement") {
    const PolicyDims dims{3, 2, 4, 4, 6};
    const Prompt p = random_prompt(dims, 31);
    const std::vector<int> tokens{2, 0};

    const PolicyParams params = init_params(dims, 31, 0.5);
    const std::vector<double> zero_w(2, 0.0);
    const auto g0 = backprop_weighted_logprob(params, p, tokens, zero_w);
    for (double g : g0) REQUIRE(g == 0.0);

    const std::vector<double> w1{0.7, -1.3};
    const std::vector<double> w2{-0.2, 0.5};
    std::vector<double> w12(2);
    for (int i = 0; i < 2; ++i) w12[i] = w1[i] + w2[i];
    const auto ga = backprop_weighted_logprob(params, p, tokens, w1);
    const auto gb = backprop_weighted_logprob(params, p, tokens, w2);
    const auto gab = backprop_weighted_logprob(params, p, tokens, w12);
    for (std::size_t i = 0; i < ga.size(); ++i)
        REQUIRE(ga[i] + gb[i] == Catch::Approx(gab[i]).margin(1e-10));

    for (std::uint64_t seed : {41ull, 42ull}) {
        const PolicyParams rp = init_params(dims, seed, 0.5);
        const auto g = backprop_weighted_logprob(rp, p, tokens, w1);
        const auto fd = finite_diff_grad(
            [&](const PolicyParams& q) {
                const auto [lp, ent] = logprobs_and_entropy(q, p, tokens);
                return w1[0] * lp[0] + w1[1] * lp[1];
            },
            rp, 1e-5);
        REQUIRE(max_relative_error(g, fd) < 1e-4);
    }
}

TEST_CASE("KL: identical policies give zero, hand value, nonnegativity, FD") {
    const PolicyDims dims{2, 1, 1, 1, 1};
    const Prompt p = unit_prompt(1);
    const std::vector<int> tokens{0};

    const PolicyParams uniform = programmable_logits(2, {0.0, 0.0});
    const auto [kl_same, g_same] = backprop_kl(uniform, uniform, p, tokens);
    REQUIRE(kl_same == 0.0);
    for (double g : g_same) REQUIRE(g == 0.0);

    // p = (0.5, 0.5), q = (0.25, 0.75): KL = 0.5 ln 2 + 0.5 ln(2/3)
    const PolicyParams q = programmable_logits(2, {0.0, std::log(3.0)});
    const auto [kl, grad] = backprop_kl(uniform, q, p, tokens);
    REQUIRE(kl == Catch::Approx(0.14384103622589045).epsilon(1e-12));

    const PolicyDims big{5, 3, 4, 3, 4};
    const Prompt bp = random_prompt(big, 51);
    const std::vector<int> btok{1, 4, 0};
    for (std::uint64_t seed : {61ull, 62ull, 63ull}) {
        const PolicyParams a = init_params(big, seed, 0.6);
        const PolicyParams b = init_params(big, seed + 100, 0.6);
        const auto [v, g] = backprop_kl(a, b, bp, btok);
        REQUIRE(v >= 0.0);
        const auto fd = finite_diff_grad(
            [&](const PolicyParams& t) { return kl_value(t, b, bp, btok); }, a, 1e-5);
        REQUIRE(max_relative_error(g, fd) < 1e-4);
        REQUIRE(kl_value(a, b, bp, btok) == Catch::Approx(v).margin(1e-14));
    }
}

TEST_CASE("entropy gradient vanishes at uniform and matches FD elsewhere") {
    const PolicyDims dims{4, 2, 3, 2, 2};
    const Prompt p = random_prompt(dims, 71);
    const std::vector<int> tokens{1, 3};

    const PolicyParams uniform = init_params(dims, 1, 0.0);
    const auto [h_u, g_u] = backprop_entropy(uniform, p, tokens);
    REQUIRE(h_u == Catch::Approx(std::log(4.0)).margin(1e-12));
    for (double g : g_u) REQUIRE(std::abs(g) < 1e-14);

    for (std::uint64_t seed : {81ull, 82ull}) {
        const PolicyParams params = init_params(dims, seed, 0.7);
        const auto [h, g] = backprop_entropy(params, p, tokens);
        REQUIRE(h >= 0.0);
        REQUIRE(h <= std::log(4.0) + 1e-12);
        const auto fd = finite_diff_grad(
            [&](const PolicyParams& q) { return backprop_entropy(q, p, tokens).first; },
            params, 1e-5);
        REQUIRE(max_relative_error(g, fd) < 1e-4);
    }
}

TEST_CASE("snapshots have value semantics") {
    const PolicyDims dims{3, 2, 2, 2, 2};
    PolicyParams params = init_params(dims, 9, 0.3);
    const PolicyParams snapshot = params;
    params.w[0] += 1.0;
    REQUIRE(snapshot.w[0] != params.w[0]);
    REQUIRE(snapshot == init_params(dims, 9, 0.3));
}

TEST_CASE("shape and range violations raise usage errors") {
    const PolicyDims dims{3, 2, 4, 4, 6};
    const PolicyParams params = init_params(dims, 1, 0.5);
    const Prompt p = random_prompt(dims, 1);

    Prompt bad_ctx = p;
    bad_ctx.context.resize(2);
    REQUIRE_THROWS_AS(next_token_dist(params, bad_ctx, std::vector<int>{}),
                      UsageError);
    REQUIRE_THROWS_AS(next_token_dist(params, p, std::vector<int>{0, 1}), UsageError);
    REQUIRE_THROWS_AS(logprobs_and_entropy(params, p, std::vector<int>{0, 5}),
                      UsageError);
    REQUIRE_THROWS_AS(
        backprop_weighted_logprob(params, p, std::vector<int>{0, 1},
                                  std::vector<double>{1.0}),
        UsageError);
    const PolicyParams other = init_params(PolicyDims{3, 2, 4, 4, 7}, 1, 0.5);
    REQUIRE_THROWS_AS(backprop_kl(params, other, p, std::vector<int>{0}), UsageError);
}

TEST_CASE("parameters round-trip through the text checkpoint") {
    const PolicyDims dims{5, 3, 6, 4, 8};
    const PolicyParams params = init_params(dims, 17, 0.42);
    std::stringstream ss;
    save_params(params, ss);
    const PolicyParams r = load_params(ss);
    REQUIRE(r.dims == params.dims);
    REQUIRE(r.w == params.w);
}
