#pragma once

// Small autoregressive softmax policy over a fixed vocabulary. The state fed
// to the head at step t is tanh(W1^T x_t + C^T ctx), where x_t is the mean
// embedding of the tokens generated so far plus the position embedding of t.
// Gradients for the objectives the trainers need (weighted log-likelihood,
// KL, entropy) are written out by hand; sampled tokens are data, not
// differentiated through.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rlvr/env.hpp"
#include "rlvr/errors.hpp"
#include "rlvr/rng.hpp"

namespace rlvr {

struct PolicyDims {
    int vocab = 8;    // V
    int max_len = 4;  // T
    int d_ctx = 16;
    int d_emb = 16;
    int d_hid = 32;

    // Flat layout: [token emb | position emb | context proj | hidden | head].
    std::size_t emb_off() const { return 0; }
    std::size_t pos_off() const { return emb_off() + std::size_t(vocab) * d_emb; }
    std::size_t ctxp_off() const { return pos_off() + std::size_t(max_len) * d_emb; }
    std::size_t hid_off() const { return ctxp_off() + std::size_t(d_ctx) * d_hid; }
    std::size_t head_off() const { return hid_off() + std::size_t(d_emb) * d_hid; }
    std::size_t total() const { return head_off() + std::size_t(d_hid) * vocab; }

    bool operator==(const PolicyDims&) const = default;

    void validate() const {
        if (vocab < 2 || max_len < 1 || d_ctx < 1 || d_emb < 1 || d_hid < 1)
            throw ConfigError("all policy dims must be >= 1 (vocab >= 2)");
    }
};

// Flat parameter vector plus its shape descriptor. Value semantics: a copy
// is a snapshot, unaffected by later updates to the original.
struct PolicyParams {
    PolicyDims dims;
    std::vector<double> w;

    bool operator==(const PolicyParams&) const = default;
};

struct Rollout {
    int prompt_id = 0;
    std::vector<int> tokens;
    std::vector<double> logprobs_old;   // <= 0, recorded at sampling time
    std::vector<double> entropies_old;  // in [0, ln V], recorded at sampling time
    int reward = 0;
};

inline PolicyParams init_params(const PolicyDims& dims, std::uint64_t seed,
                                double init_scale = 0.08) {
    dims.validate();
    PolicyParams p{dims, std::vector<double>(dims.total())};
    Rng rng = make_stream(seed, stream::kPolicyInit);
    for (double& v : p.w) v = init_scale * rng.normal();
    return p;
}

namespace detail {

inline void check_context(const PolicyParams& params, const Prompt& prompt) {
    if (static_cast<int>(prompt.context.size()) != params.dims.d_ctx)
        throw UsageError("prompt context width does not match policy d_ctx");
}

inline void check_tokens(const PolicyDims& dims, std::span<const int> tokens) {
    if (static_cast<int>(tokens.size()) > dims.max_len)
        throw UsageError("token sequence longer than max_len");
    for (int t : tokens)
        if (t < 0 || t >= dims.vocab) throw UsageError("token out of vocabulary");
}

// C^T ctx, shared by every step of a sequence.
inline std::vector<double> context_preact(const PolicyParams& params,
                                          std::span<const double> ctx) {
    const PolicyDims& d = params.dims;
    std::vector<double> pre(d.d_hid, 0.0);
    const double* C = params.w.data() + d.ctxp_off();
    for (int f = 0; f < d.d_ctx; ++f) {
        const double cf = ctx[f];
        const double* row = C + std::size_t(f) * d.d_hid;
        for (int i = 0; i < d.d_hid; ++i) pre[i] += cf * row[i];
    }
    return pre;
}

struct StepCache {
    std::vector<double> x;  // d_emb input (mean prefix embedding + position)
    std::vector<double> h;  // d_hid hidden activations
    std::vector<double> p;  // V next-token probabilities
};

// Forward for one step given the running prefix-embedding sum. Log-space
// softmax with max subtraction.
inline StepCache forward_step(const PolicyParams& params,
                              const std::vector<double>& ctx_pre,
                              const std::vector<double>& emb_sum, int t) {
    const PolicyDims& d = params.dims;
    StepCache s;
    s.x.assign(params.w.begin() + d.pos_off() + std::size_t(t) * d.d_emb,
               params.w.begin() + d.pos_off() + std::size_t(t + 1) * d.d_emb);
    if (t > 0) {
        const double inv = 1.0 / t;
        for (int e = 0; e < d.d_emb; ++e) s.x[e] += emb_sum[e] * inv;
    }

    s.h.assign(ctx_pre.begin(), ctx_pre.end());
    const double* W1 = params.w.data() + d.hid_off();
    for (int e = 0; e < d.d_emb; ++e) {
        const double xe = s.x[e];
        const double* row = W1 + std::size_t(e) * d.d_hid;
        for (int i = 0; i < d.d_hid; ++i) s.h[i] += xe * row[i];
    }
    for (double& hi : s.h) hi = std::tanh(hi);

    std::vector<double> z(d.vocab, 0.0);
    const double* W2 = params.w.data() + d.head_off();
    for (int i = 0; i < d.d_hid; ++i) {
        const double hi = s.h[i];
        const double* row = W2 + std::size_t(i) * d.vocab;
        for (int v = 0; v < d.vocab; ++v) z[v] += hi * row[v];
    }
    double zmax = z[0];
    for (double zv : z) zmax = std::max(zmax, zv);
    double denom = 0.0;
    for (double zv : z) denom += std::exp(zv - zmax);
    s.p.resize(d.vocab);
    for (int v = 0; v < d.vocab; ++v) s.p[v] = std::exp(z[v] - zmax) / denom;
    return s;
}

inline void add_embedding(const PolicyParams& params, std::vector<double>& emb_sum,
                          int token) {
    const PolicyDims& d = params.dims;
    const double* row = params.w.data() + d.emb_off() + std::size_t(token) * d.d_emb;
    for (int e = 0; e < d.d_emb; ++e) emb_sum[e] += row[e];
}

// Caches for every step of a fixed token sequence.
inline std::vector<StepCache> forward_sequence(const PolicyParams& params,
                                               const Prompt& prompt,
                                               std::span<const int> tokens) {
    check_context(params, prompt);
    check_tokens(params.dims, tokens);
    const auto ctx_pre = context_preact(params, prompt.context);
    std::vector<double> emb_sum(params.dims.d_emb, 0.0);
    std::vector<StepCache> steps;
    steps.reserve(tokens.size());
    for (int t = 0; t < static_cast<int>(tokens.size()); ++t) {
        steps.push_back(forward_step(params, ctx_pre, emb_sum, t));
        add_embedding(params, emb_sum, tokens[t]);
    }
    return steps;
}

// Pushes dL/dz of step t back onto the flat gradient vector.
inline void backprop_step(const PolicyParams& params, const Prompt& prompt,
                          std::span<const int> tokens, const StepCache& s, int t,
                          std::span<const double> dz, std::vector<double>& grad) {
    const PolicyDims& d = params.dims;
    const double* W2 = params.w.data() + d.head_off();
    double* gW2 = grad.data() + d.head_off();

    std::vector<double> dh(d.d_hid, 0.0);
    for (int i = 0; i < d.d_hid; ++i) {
        const double* row = W2 + std::size_t(i) * d.vocab;
        double* grow = gW2 + std::size_t(i) * d.vocab;
        double acc = 0.0;
        for (int v = 0; v < d.vocab; ++v) {
            acc += row[v] * dz[v];
            grow[v] += s.h[i] * dz[v];
        }
        dh[i] = acc;
    }

    std::vector<double> da(d.d_hid);
    for (int i = 0; i < d.d_hid; ++i) da[i] = (1.0 - s.h[i] * s.h[i]) * dh[i];

    const double* W1 = params.w.data() + d.hid_off();
    double* gW1 = grad.data() + d.hid_off();
    std::vector<double> dx(d.d_emb, 0.0);
    for (int e = 0; e < d.d_emb; ++e) {
        const double* row = W1 + std::size_t(e) * d.d_hid;
        double* grow = gW1 + std::size_t(e) * d.d_hid;
        double acc = 0.0;
        for (int i = 0; i < d.d_hid; ++i) {
            acc += row[i] * da[i];
            grow[i] += s.x[e] * da[i];
        }
        dx[e] = acc;
    }

    double* gC = grad.data() + d.ctxp_off();
    for (int f = 0; f < d.d_ctx; ++f) {
        const double cf = prompt.context[f];
        if (cf == 0.0) continue;
        double* grow = gC + std::size_t(f) * d.d_hid;
        for (int i = 0; i < d.d_hid; ++i) grow[i] += cf * da[i];
    }

    double* gpos = grad.data() + d.pos_off() + std::size_t(t) * d.d_emb;
    for (int e = 0; e < d.d_emb; ++e) gpos[e] += dx[e];
    if (t > 0) {
        const double inv = 1.0 / t;
        for (int j = 0; j < t; ++j) {
            double* gemb =
                grad.data() + d.emb_off() + std::size_t(tokens[j]) * d.d_emb;
            for (int e = 0; e < d.d_emb; ++e) gemb[e] += inv * dx[e];
        }
    }
}

inline double entropy_of(std::span<const double> p, int vocab) {
    double h = 0.0;
    for (double pv : p)
        if (pv > 0.0) h -= pv * std::log(pv);
    return std::min(h, std::log(static_cast<double>(vocab)));
}

}  // namespace detail

inline std::vector<double> next_token_dist(const PolicyParams& params,
                                           const Prompt& prompt,
                                           std::span<const int> prefix) {
    detail::check_context(params, prompt);
    if (static_cast<int>(prefix.size()) >= params.dims.max_len)
        throw UsageError("prefix must be shorter than max_len");
    detail::check_tokens(params.dims, prefix);
    const auto ctx_pre = detail::context_preact(params, prompt.context);
    std::vector<double> emb_sum(params.dims.d_emb, 0.0);
    for (int tok : prefix) detail::add_embedding(params, emb_sum, tok);
    return detail::forward_step(params, ctx_pre, emb_sum,
                                static_cast<int>(prefix.size()))
        .p;
}

// Samples a full fixed-length rollout; the reward is filled in by the caller
// via env verify. Log-probs and entropies are recorded from the
// sampling-time distributions.
inline Rollout sample_rollout(const PolicyParams& params, const Prompt& prompt,
                              Rng& rng) {
    detail::check_context(params, prompt);
    const PolicyDims& d = params.dims;
    const auto ctx_pre = detail::context_preact(params, prompt.context);
    std::vector<double> emb_sum(d.d_emb, 0.0);

    Rollout r;
    r.prompt_id = prompt.id;
    r.tokens.reserve(d.max_len);
    r.logprobs_old.reserve(d.max_len);
    r.entropies_old.reserve(d.max_len);
    for (int t = 0; t < d.max_len; ++t) {
        const auto step = detail::forward_step(params, ctx_pre, emb_sum, t);
        const double u = rng.uniform01();
        int tok = d.vocab - 1;
        double cum = 0.0;
        for (int v = 0; v < d.vocab; ++v) {
            cum += step.p[v];
            if (u < cum) {
                tok = v;
                break;
            }
        }
        r.tokens.push_back(tok);
        r.logprobs_old.push_back(std::log(step.p[tok]));
        r.entropies_old.push_back(detail::entropy_of(step.p, d.vocab));
        detail::add_embedding(params, emb_sum, tok);
    }
    return r;
}

// Per-token log-probabilities and next-token entropies along a fixed
// sequence.
inline std::pair<std::vector<double>, std::vector<double>> logprobs_and_entropy(
    const PolicyParams& params, const Prompt& prompt, std::span<const int> tokens) {
    const auto steps = detail::forward_sequence(params, prompt, tokens);
    std::vector<double> lp(tokens.size()), ent(tokens.size());
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        lp[t] = std::log(steps[t].p[tokens[t]]);
        ent[t] = detail::entropy_of(steps[t].p, params.dims.vocab);
    }
    return {std::move(lp), std::move(ent)};
}

// Exact gradient of sum_t w_t log pi(tokens[t] | prefix). Weights are
// constants: this is where stop-gradient on advantages and entropies lands.
inline std::vector<double> backprop_weighted_logprob(const PolicyParams& params,
                                                     const Prompt& prompt,
                                                     std::span<const int> tokens,
                                                     std::span<const double> weights) {
    if (weights.size() != tokens.size())
        throw UsageError("weights length must match token length");
    const auto steps = detail::forward_sequence(params, prompt, tokens);
    std::vector<double> grad(params.dims.total(), 0.0);
    std::vector<double> dz(params.dims.vocab);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const double wt = weights[t];
        if (wt == 0.0) continue;
        // d/dz log p_k = e_k - p
        for (int v = 0; v < params.dims.vocab; ++v) dz[v] = -wt * steps[t].p[v];
        dz[tokens[t]] += wt;
        detail::backprop_step(params, prompt, tokens, steps[t],
                              static_cast<int>(t), dz, grad);
    }
    return grad;
}

// Mean over steps of KL(p_t || q_t) at the visited prefixes, where p comes
// from params_p evaluated on prompt_p and q from params_q on prompt_q. The
// gradient is exact w.r.t. params_p and zero w.r.t. params_q (the q side is
// an anchor).
inline std::pair<double, std::vector<double>> backprop_kl_two_sided(
    const PolicyParams& params_p, const Prompt& prompt_p,
    const PolicyParams& params_q, const Prompt& prompt_q,
    std::span<const int> tokens) {
    if (params_p.dims != params_q.dims)
        throw UsageError("policy shapes must match for KL");
    const auto steps_p = detail::forward_sequence(params_p, prompt_p, tokens);
    const auto steps_q = detail::forward_sequence(params_q, prompt_q, tokens);

    const int V = params_p.dims.vocab;
    const double inv_len = tokens.empty() ? 0.0 : 1.0 / static_cast<double>(tokens.size());
    double total = 0.0;
    std::vector<double> grad(params_p.dims.total(), 0.0);
    std::vector<double> dz(V);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto& p = steps_p[t].p;
        const auto& q = steps_q[t].p;
        double kl = 0.0;
        for (int v = 0; v < V; ++v) kl += p[v] * std::log(p[v] / q[v]);
        total += kl;
        // d KL / dz_j = p_j (log(p_j/q_j) - KL)
        for (int v = 0; v < V; ++v)
            dz[v] = inv_len * p[v] * (std::log(p[v] / q[v]) - kl);
        detail::backprop_step(params_p, prompt_p, tokens, steps_p[t],
                              static_cast<int>(t), dz, grad);
    }
    return {total * inv_len, std::move(grad)};
}

inline std::pair<double, std::vector<double>> backprop_kl(
    const PolicyParams& params_p, const PolicyParams& params_q,
    const Prompt& prompt, std::span<const int> tokens) {
    return backprop_kl_two_sided(params_p, prompt, params_q, prompt, tokens);
}

// Value-only KL(p || q) along a sequence, mean over steps.
inline double kl_value(const PolicyParams& params_p, const PolicyParams& params_q,
                       const Prompt& prompt, std::span<const int> tokens) {
    if (params_p.dims != params_q.dims)
        throw UsageError("policy shapes must match for KL");
    const auto steps_p = detail::forward_sequence(params_p, prompt, tokens);
    const auto steps_q = detail::forward_sequence(params_q, prompt, tokens);
    double total = 0.0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        for (int v = 0; v < params_p.dims.vocab; ++v)
            total += steps_p[t].p[v] * std::log(steps_p[t].p[v] / steps_q[t].p[v]);
    }
    return tokens.empty() ? 0.0 : total / static_cast<double>(tokens.size());
}

// Mean per-token entropy along a sequence and its exact gradient.
inline std::pair<double, std::vector<double>> backprop_entropy(
    const PolicyParams& params, const Prompt& prompt, std::span<const int> tokens) {
    const auto steps = detail::forward_sequence(params, prompt, tokens);
    const int V = params.dims.vocab;
    const double inv_len = tokens.empty() ? 0.0 : 1.0 / static_cast<double>(tokens.size());
    double total = 0.0;
    std::vector<double> grad(params.dims.total(), 0.0);
    std::vector<double> dz(V);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto& p = steps[t].p;
        double h = 0.0;
        for (int v = 0; v < V; ++v) h -= p[v] * std::log(p[v]);
        total += h;
        // d H / dz_j = -p_j (log p_j + H)
        for (int v = 0; v < V; ++v)
            dz[v] = -inv_len * p[v] * (std::log(p[v]) + h);
        detail::backprop_step(params, prompt, tokens, steps[t],
                              static_cast<int>(t), dz, grad);
    }
    return {total * inv_len, std::move(grad)};
}

// Flat text checkpoint: shape header then one value per line.
inline void save_params(const PolicyParams& params, std::ostream& os) {
    const PolicyDims& d = params.dims;
    os << d.vocab << ' ' << d.max_len << ' ' << d.d_ctx << ' ' << d.d_emb << ' '
       << d.d_hid << '\n';
    os.precision(17);
    for (double v : params.w) os << v << '\n';
}

inline PolicyParams load_params(std::istream& is) {
    PolicyParams p;
    if (!(is >> p.dims.vocab >> p.dims.max_len >> p.dims.d_ctx >> p.dims.d_emb >>
          p.dims.d_hid))
        throw ConfigError("malformed parameter header");
    p.dims.validate();
    p.w.resize(p.dims.total());
    for (double& v : p.w)
        if (!(is >> v)) throw ConfigError("parameter file truncated");
    return p;
}

}  // namespace rlvr
