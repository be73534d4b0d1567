#pragma once

// Training orchestration: rollout collection (optionally fanned out over
// threads with per-slot derived RNG streams, so results are identical for
// any degree of parallelism), advantage estimation for all five algorithms,
// the clipped surrogate with its regularizers, AdamW, step-KL measurement,
// and per-step metrics. Mutation happens only in the serial phase.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rlvr/advantage.hpp"
#include "rlvr/baseline.hpp"
#include "rlvr/env.hpp"
#include "rlvr/errors.hpp"
#include "rlvr/policy.hpp"
#include "rlvr/rng.hpp"
#include "rlvr/scheduler.hpp"

namespace rlvr {

enum class Algo { kGrpo, kRloo, kReinforcePP, kMvsr, kMssr };

inline const char* to_string(Algo a) {
    switch (a) {
        case Algo::kGrpo: return "grpo";
        case Algo::kRloo: return "rloo";
        case Algo::kReinforcePP: return "reinforce_pp";
        case Algo::kMvsr: return "mvsr";
        case Algo::kMssr: return "mssr";
    }
    return "?";
}

inline Algo parse_algo(const std::string& s) {
    if (s == "grpo") return Algo::kGrpo;
    if (s == "rloo") return Algo::kRloo;
    if (s == "reinforce_pp" || s == "reinforce++") return Algo::kReinforcePP;
    if (s == "mvsr") return Algo::kMvsr;
    if (s == "mssr") return Algo::kMssr;
    throw ConfigError("unknown algo '" + s +
                      "' (expected grpo|rloo|reinforce_pp|mvsr|mssr)");
}

inline bool is_group_based(Algo a) { return a == Algo::kGrpo || a == Algo::kRloo; }
inline bool uses_beta_baseline(Algo a) { return a == Algo::kMvsr || a == Algo::kMssr; }

struct OptimConfig {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct PolicyConfig {
    int d_emb = 8;
    int d_hid = 16;
    double init_scale = 0.08;
};

struct TrainConfig {
    Algo algo = Algo::kMssr;
    int prompts_per_step = 256;
    int rollouts_per_prompt = 1;  // G for group methods, 1 for group-free
    int steps = 300;
    int epochs_per_batch = 1;
    double clip_eps = 0.2;
    double kl_ref_coef = 0.01;
    double entropy_loss_coef = 0.0;
    double crossmodal_coef = 0.0;  // > 0 replaces the reference-KL term
    double gamma = 0.4;
    double lambda = 2.0;
    bool cap_bonus = false;
    bool normalize_advantages = true;
    double eps_std = 1e-6;
    double eta_min = 0.875;
    double eta_max = 0.96;
    int window = 20;
    double kl_target = 0.01;
    int baseline_init_rollouts = 4;  // 1 = strict single-pass initialization
    OptimConfig optim;
    PolicyConfig policy;
    TaskConfig task;
    double val_fraction = 0.2;
    std::uint64_t seed = 7;
    int eval_every = 1;
    int num_threads = 1;

    int rollout_budget() const { return prompts_per_step * rollouts_per_prompt; }

    void validate() const {
        if (steps < 1) throw ConfigError("steps must be >= 1");
        if (prompts_per_step < 1) throw ConfigError("prompts_per_step must be >= 1");
        if (rollouts_per_prompt < 1)
            throw ConfigError("rollouts_per_prompt must be >= 1");
        if (is_group_based(algo) && rollouts_per_prompt < 2)
            throw ConfigError(std::string(to_string(algo)) +
                              " requires rollouts_per_prompt >= 2");
        if (!is_group_based(algo) && rollouts_per_prompt != 1)
            throw ConfigError(std::string(to_string(algo)) +
                              " is group-free and requires rollouts_per_prompt == 1");
        if (rollout_budget() < 2)
            throw ConfigError("need at least 2 rollouts per step");
        if (epochs_per_batch < 1) throw ConfigError("epochs_per_batch must be >= 1");
        if (!(clip_eps > 0.0)) throw ConfigError("clip_eps must be > 0");
        if (kl_ref_coef < 0.0 || entropy_loss_coef < 0.0 || crossmodal_coef < 0.0)
            throw ConfigError("regularizer coefficients must be >= 0");
        if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
        if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
        if (eps_std < 0.0) throw ConfigError("eps_std must be >= 0");
        if (!(eta_min > 0.0 && eta_min <= eta_max && eta_max <= 1.0))
            throw ConfigError("need 0 < eta_min <= eta_max <= 1");
        if (eta_min >= 1.0) throw ConfigError("eta_min must be < 1");
        if (window < 1) throw ConfigError("window must be >= 1");
        if (!(kl_target > 0.0)) throw ConfigError("kl_target must be > 0");
        if (baseline_init_rollouts < 1)
            throw ConfigError("baseline_init_rollouts must be >= 1");
        if (!(optim.lr > 0.0)) throw ConfigError("lr must be > 0");
        if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0) ||
            !(optim.beta2 >= 0.0 && optim.beta2 < 1.0))
            throw ConfigError("adam betas must be in [0, 1)");
        if (!(optim.eps > 0.0)) throw ConfigError("adam eps must be > 0");
        if (optim.weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
        if (policy.d_emb < 1 || policy.d_hid < 1)
            throw ConfigError("policy dims must be >= 1");
        if (policy.init_scale < 0.0) throw ConfigError("init_scale must be >= 0");
        if (!(val_fraction > 0.0 && val_fraction < 1.0))
            throw ConfigError("val_fraction must be in (0, 1)");
        if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
        if (num_threads < 1) throw ConfigError("num_threads must be >= 1");
        if (task.count < 2) throw ConfigError("task count must be >= 2 to split");
    }
};

struct MetricsRecord {
    int step = 0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double mean_entropy = 0.0;
    double mean_kl_step = 0.0;
    double eta = 0.0;
    double mean_abs_advantage = 0.0;
    double mean_bonus = 0.0;
    double loss = 0.0;
    double clip_fraction = 0.0;

    static const char* csv_header() {
        return "step,train_acc,val_acc,mean_entropy,mean_kl_step,eta,"
               "mean_abs_advantage,mean_bonus,loss,clip_fraction";
    }

    std::string to_csv_row() const {
        char buf[512];
        auto g = [](double v, char* out, std::size_t n) {
            std::snprintf(out, n, "%.10g", v);
        };
        char c[9][40];
        g(train_acc, c[0], sizeof c[0]);
        g(val_acc, c[1], sizeof c[1]);
        g(mean_entropy, c[2], sizeof c[2]);
        g(mean_kl_step, c[3], sizeof c[3]);
        g(eta, c[4], sizeof c[4]);
        g(mean_abs_advantage, c[5], sizeof c[5]);
        g(mean_bonus, c[6], sizeof c[6]);
        g(loss, c[7], sizeof c[7]);
        g(clip_fraction, c[8], sizeof c[8]);
        std::snprintf(buf, sizeof buf, "%d,%s,%s,%s,%s,%s,%s,%s,%s,%s", step, c[0],
                      c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8]);
        return buf;
    }
};

// AdamW with decoupled weight decay applied before the moment step.
class AdamW {
public:
    explicit AdamW(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

    void step(std::vector<double>& w, std::span<const double> grad,
              const OptimConfig& cfg) {
        if (w.size() != m_.size() || grad.size() != m_.size())
            throw UsageError("optimizer/parameter size mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
        const double decay = 1.0 - cfg.lr * cfg.weight_decay;
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] *= decay;
            m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * grad[i];
            v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }

    long step_count() const { return t_; }
    const std::vector<double>& m() const { return m_; }
    const std::vector<double>& v() const { return v_; }
    void restore(std::vector<double> m, std::vector<double> v, long t) {
        m_ = std::move(m);
        v_ = std::move(v);
        t_ = t;
    }

private:
    std::vector<double> m_, v_;
    long t_ = 0;
};

namespace detail {

// Chunked parallel-for. Work items must be independent; determinism comes
// from the items themselves, not the schedule.
template <class Fn>
inline void parallel_for(int n, int num_threads, Fn&& fn) {
    if (num_threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = std::min(num_threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([=, &fn] {
            for (int i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

struct BatchData {
    std::vector<int> prompt_index;   // per rollout, position in the train suite
    std::vector<Rollout> rollouts;   // per rollout, with rewards filled in
    AdvantageBatch adv;
};

struct StepLossParts {
    double loss = 0.0;
    double surrogate = 0.0;
    double kl_reg = 0.0;       // reference-KL or cross-modal term, with coefficient
    double entropy_reg = 0.0;  // entropy loss term, with coefficient
    double clip_fraction = 0.0;
};

class Trainer {
public:
    explicit Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        TaskSuite full = make_task_suite(cfg_.task);
        auto [train, val] = split(full, cfg_.val_fraction, cfg_.seed);
        train_ = std::move(train);
        val_ = std::move(val);
        if (cfg_.prompts_per_step > static_cast<int>(train_.prompts.size()))
            throw ConfigError("prompts_per_step exceeds train suite size");

        PolicyDims dims{cfg_.task.vocab, cfg_.task.max_len, cfg_.task.d_ctx,
                        cfg_.policy.d_emb, cfg_.policy.d_hid};
        params_ = init_params(dims, cfg_.seed, cfg_.policy.init_scale);
        ref_ = params_;
        adam_ = AdamW(params_.w.size());
        scheduler_.emplace(cfg_.eta_min, cfg_.eta_max, cfg_.window, cfg_.kl_target);

        if (uses_beta_baseline(cfg_.algo)) init_baseline();
        last_val_ = evaluate(params_, val_);
    }

    Trainer(TrainConfig cfg, const std::string& checkpoint_path)
        : Trainer(std::move(cfg)) {
        load_checkpoint(checkpoint_path);
    }

    // --- one full training step -------------------------------------------

    MetricsRecord train_step() {
        ++step_;
        const PolicyParams old = params_;  // snapshot of the behavior policy
        const double eta_used = scheduler_->current_eta();

        BatchData batch = collect_batch(step_);
        compute_advantages(batch);

        StepLossParts parts_sum;
        for (int epoch = 0; epoch < cfg_.epochs_per_batch; ++epoch) {
            auto [parts, grad] = loss_and_grad(params_, params_, batch);
            check_finite(parts.loss, grad, batch, epoch);
            adam_.step(params_.w, grad, cfg_.optim);
            parts_sum.loss += parts.loss;
            parts_sum.clip_fraction += parts.clip_fraction;
        }
        const double inv_epochs = 1.0 / cfg_.epochs_per_batch;

        const double step_kl = measure_step_kl(old, params_, batch);
        if (!std::isfinite(step_kl))
            throw NumericalError(
                "training aborted: non-finite step KL at step " +
                    std::to_string(step_),
                batch_dump(batch, "step " + std::to_string(step_) + " step_kl " +
                                      std::to_string(step_kl)));
        scheduler_->record_kl(step_kl);

        if (uses_beta_baseline(cfg_.algo)) {
            for (std::size_t i = 0; i < batch.rollouts.size(); ++i)
                tracker_.update(batch.rollouts[i].prompt_id, batch.rollouts[i].reward,
                                eta_used);
        }

        MetricsRecord rec;
        rec.step = step_;
        double reward_sum = 0.0, ent_sum = 0.0, abs_adv = 0.0, bonus_sum = 0.0;
        std::size_t tok_n = 0;
        for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
            reward_sum += batch.rollouts[i].reward;
            for (double h : batch.rollouts[i].entropies_old) ent_sum += h;
            for (double b : batch.adv.bonus[i]) bonus_sum += b;
            tok_n += batch.rollouts[i].tokens.size();
            abs_adv += std::abs(batch.adv.sequence[i]);
        }
        rec.train_acc = reward_sum / static_cast<double>(batch.rollouts.size());
        rec.mean_entropy = ent_sum / static_cast<double>(tok_n);
        rec.mean_kl_step = step_kl;
        rec.eta = eta_used;
        rec.mean_abs_advantage = abs_adv / static_cast<double>(batch.rollouts.size());
        rec.mean_bonus = bonus_sum / static_cast<double>(tok_n);
        rec.loss = parts_sum.loss * inv_epochs;
        rec.clip_fraction = parts_sum.clip_fraction * inv_epochs;

        if (step_ % cfg_.eval_every == 0 || step_ == cfg_.steps)
            last_val_ = evaluate(params_, val_);
        rec.val_acc = last_val_;
        return rec;
    }

    // Runs remaining steps; sink(record) is called after each step.
    template <class Sink>
    std::vector<MetricsRecord> run(Sink&& sink) {
        std::vector<MetricsRecord> out;
        out.reserve(cfg_.steps - step_);
        while (step_ < cfg_.steps) {
            out.push_back(train_step());
            sink(out.back());
        }
        return out;
    }

    std::vector<MetricsRecord> run() {
        return run([](const MetricsRecord&) {});
    }

    // --- batch machinery (public so the verification suites can drive it) --

    BatchData collect_batch(int step) const {
        const int n_train = static_cast<int>(train_.prompts.size());
        std::vector<int> order(n_train);
        for (int i = 0; i < n_train; ++i) order[i] = i;
        Rng pick = make_stream(cfg_.seed, stream::kBatchSelect,
                               static_cast<std::uint64_t>(step));
        for (int i = 0; i < cfg_.prompts_per_step; ++i) {
            const int j =
                i + static_cast<int>(pick.uniform_int(
                        static_cast<std::uint64_t>(n_train - i)));
            std::swap(order[i], order[j]);
        }

        const int total = cfg_.rollout_budget();
        BatchData batch;
        batch.prompt_index.resize(total);
        batch.rollouts.resize(total);
        for (int s = 0; s < total; ++s)
            batch.prompt_index[s] = order[s / cfg_.rollouts_per_prompt];

        detail::parallel_for(total, cfg_.num_threads, [&](int s) {
            const Prompt& p = train_.prompts[batch.prompt_index[s]];
            Rng rng = make_stream(cfg_.seed, stream::kRollout,
                                  static_cast<std::uint64_t>(step),
                                  static_cast<std::uint64_t>(s));
            Rollout r = sample_rollout(params_, p, rng);
            r.reward = verify(p, r.tokens);
            batch.rollouts[s] = std::move(r);
        });
        return batch;
    }

    void compute_advantages(BatchData& batch) const {
        const int total = static_cast<int>(batch.rollouts.size());
        const int g = cfg_.rollouts_per_prompt;
        std::vector<double>& seq = batch.adv.sequence;
        seq.assign(total, 0.0);

        if (is_group_based(cfg_.algo)) {
            std::vector<double> group(g);
            for (int base = 0; base < total; base += g) {
                for (int k = 0; k < g; ++k)
                    group[k] = batch.rollouts[base + k].reward;
                const auto a = cfg_.algo == Algo::kGrpo
                                   ? grpo_advantages(group, cfg_.eps_std)
                                   : rloo_advantages(group);
                for (int k = 0; k < g; ++k) seq[base + k] = a[k];
            }
        } else if (cfg_.algo == Algo::kReinforcePP) {
            std::vector<double> rewards(total);
            for (int i = 0; i < total; ++i) rewards[i] = batch.rollouts[i].reward;
            seq = batch_normalize(rewards, cfg_.eps_std);
        } else {
            for (int i = 0; i < total; ++i) {
                const Rollout& r = batch.rollouts[i];
                seq[i] = single_rollout_advantage(r.reward, tracker_.mean(r.prompt_id));
            }
            if (cfg_.normalize_advantages) seq = batch_normalize(seq, cfg_.eps_std);
        }

        batch.adv.shaping_applied = cfg_.algo == Algo::kMssr;
        batch.adv.shaped.resize(total);
        batch.adv.bonus.resize(total);
        for (int i = 0; i < total; ++i) {
            const std::size_t len = batch.rollouts[i].tokens.size();
            std::vector<double> row(len, seq[i]);
            if (batch.adv.shaping_applied) {
                batch.adv.bonus[i] =
                    entropy_bonus(row, batch.rollouts[i].entropies_old, cfg_.gamma,
                                  cfg_.lambda, cfg_.cap_bonus);
                for (std::size_t t = 0; t < len; ++t) row[t] += batch.adv.bonus[i][t];
            } else {
                batch.adv.bonus[i].assign(len, 0.0);
            }
            batch.adv.shaped[i] = std::move(row);
        }
    }

    // Scalar training loss at theta with the batch held fixed. The sampled
    // tokens, recorded log-probs, and shaped advantages are constants;
    // anchor supplies the frozen masked-branch policy for the cross-modal
    // term (stop-gradient semantics).
    StepLossParts step_loss(const PolicyParams& theta, const PolicyParams& anchor,
                            const BatchData& batch) const {
        StepLossParts parts;
        const int total = static_cast<int>(batch.rollouts.size());
        std::size_t tok_n = 0;
        long clipped = 0;

        for (int i = 0; i < total; ++i) {
            const Prompt& p = train_.prompts[batch.prompt_index[i]];
            const Rollout& r = batch.rollouts[i];
            const auto [lp_new, ent] = logprobs_and_entropy(theta, p, r.tokens);
            for (std::size_t t = 0; t < r.tokens.size(); ++t) {
                const double ratio = std::exp(lp_new[t] - r.logprobs_old[t]);
                const double a = batch.adv.shaped[i][t];
                const double clamped =
                    std::clamp(ratio, 1.0 - cfg_.clip_eps, 1.0 + cfg_.clip_eps);
                parts.surrogate += std::min(ratio * a, clamped * a);
                if (clip_zeroes_gradient(ratio, a)) ++clipped;
            }
            tok_n += r.tokens.size();

            if (cfg_.crossmodal_coef > 0.0) {
                const Prompt masked = mask_image(p);
                parts.kl_reg += cfg_.crossmodal_coef *
                                kl_two_sided_value(theta, p, anchor, masked, r.tokens);
            } else if (cfg_.kl_ref_coef > 0.0) {
                parts.kl_reg += cfg_.kl_ref_coef * kl_value(theta, ref_, p, r.tokens);
            }
            if (cfg_.entropy_loss_coef > 0.0) {
                double h = 0.0;
                for (double e : ent) h += e;
                parts.entropy_reg +=
                    cfg_.entropy_loss_coef * h / static_cast<double>(ent.size());
            }
        }
        parts.surrogate /= static_cast<double>(tok_n);
        parts.kl_reg /= static_cast<double>(total);
        parts.entropy_reg /= static_cast<double>(total);
        parts.clip_fraction = static_cast<double>(clipped) / static_cast<double>(tok_n);
        parts.loss = -parts.surrogate + parts.kl_reg - parts.entropy_reg;
        return parts;
    }

    std::pair<StepLossParts, std::vector<double>> loss_and_grad(
        const PolicyParams& theta, const PolicyParams& anchor,
        const BatchData& batch) const {
        StepLossParts parts;
        std::vector<double> grad(theta.dims.total(), 0.0);
        const int total = static_cast<int>(batch.rollouts.size());
        std::size_t tok_n = 0;
        for (const Rollout& r : batch.rollouts) tok_n += r.tokens.size();
        const double inv_tok = 1.0 / static_cast<double>(tok_n);
        const double inv_roll = 1.0 / static_cast<double>(total);
        long clipped = 0;

        std::vector<double> weights;
        for (int i = 0; i < total; ++i) {
            const Prompt& p = train_.prompts[batch.prompt_index[i]];
            const Rollout& r = batch.rollouts[i];
            const auto [lp_new, ent] = logprobs_and_entropy(theta, p, r.tokens);

            weights.assign(r.tokens.size(), 0.0);
            for (std::size_t t = 0; t < r.tokens.size(); ++t) {
                const double ratio = std::exp(lp_new[t] - r.logprobs_old[t]);
                const double a = batch.adv.shaped[i][t];
                const double clamped =
                    std::clamp(ratio, 1.0 - cfg_.clip_eps, 1.0 + cfg_.clip_eps);
                parts.surrogate += std::min(ratio * a, clamped * a);
                if (clip_zeroes_gradient(ratio, a)) {
                    ++clipped;
                } else {
                    weights[t] = a * ratio;  // d/dtheta ratio = ratio * dlogpi
                }
            }
            const auto g_surr = backprop_weighted_logprob(theta, p, r.tokens, weights);
            for (std::size_t k = 0; k < grad.size(); ++k)
                grad[k] -= inv_tok * g_surr[k];

            if (cfg_.crossmodal_coef > 0.0) {
                const Prompt masked = mask_image(p);
                auto [kl, g_kl] =
                    backprop_kl_two_sided(theta, p, anchor, masked, r.tokens);
                parts.kl_reg += cfg_.crossmodal_coef * kl;
                for (std::size_t k = 0; k < grad.size(); ++k)
                    grad[k] += inv_roll * cfg_.crossmodal_coef * g_kl[k];
            } else if (cfg_.kl_ref_coef > 0.0) {
                auto [kl, g_kl] = backprop_kl(theta, ref_, p, r.tokens);
                parts.kl_reg += cfg_.kl_ref_coef * kl;
                for (std::size_t k = 0; k < grad.size(); ++k)
                    grad[k] += inv_roll * cfg_.kl_ref_coef * g_kl[k];
            }
            if (cfg_.entropy_loss_coef > 0.0) {
                auto [h, g_h] = backprop_entropy(theta, p, r.tokens);
                parts.entropy_reg += cfg_.entropy_loss_coef * h;
                for (std::size_t k = 0; k < grad.size(); ++k)
                    grad[k] -= inv_roll * cfg_.entropy_loss_coef * g_h[k];
            }
        }
        parts.surrogate *= inv_tok;
        parts.kl_reg *= inv_roll;
        parts.entropy_reg *= inv_roll;
        parts.clip_fraction = static_cast<double>(clipped) / static_cast<double>(tok_n);
        parts.loss = -parts.surrogate + parts.kl_reg - parts.entropy_reg;
        return {parts, std::move(grad)};
    }

    // Exact KL(old || new) averaged over every visited (prompt, prefix) pair.
    double measure_step_kl(const PolicyParams& old_params,
                           const PolicyParams& new_params,
                           const BatchData& batch) const {
        double total = 0.0;
        for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
            const Prompt& p = train_.prompts[batch.prompt_index[i]];
            total += kl_value(old_params, new_params, p, batch.rollouts[i].tokens);
        }
        return total / static_cast<double>(batch.rollouts.size());
    }

    // Greedy (argmax, lowest index wins ties) decoding accuracy.
    static double evaluate(const PolicyParams& params, const TaskSuite& suite) {
        if (suite.prompts.empty()) throw UsageError("empty validation suite");
        double correct = 0.0;
        std::vector<int> seq;
        for (const Prompt& p : suite.prompts) {
            seq.clear();
            for (int t = 0; t < params.dims.max_len; ++t) {
                const auto dist = next_token_dist(params, p, seq);
                int best = 0;
                for (int v = 1; v < params.dims.vocab; ++v)
                    if (dist[v] > dist[best]) best = v;
                seq.push_back(best);
            }
            correct += verify(p, seq);
        }
        return correct / static_cast<double>(suite.prompts.size());
    }

    // Sampled-decoding accuracy, one rollout per prompt.
    double evaluate_sampled(const TaskSuite& suite, int step) const {
        double correct = 0.0;
        for (std::size_t i = 0; i < suite.prompts.size(); ++i) {
            Rng rng = make_stream(cfg_.seed, stream::kValSample,
                                  static_cast<std::uint64_t>(step),
                                  static_cast<std::uint64_t>(i));
            Rollout r = sample_rollout(params_, suite.prompts[i], rng);
            correct += verify(suite.prompts[i], r.tokens);
        }
        return correct / static_cast<double>(suite.prompts.size());
    }

    // --- checkpointing ------------------------------------------------------

    void save_checkpoint(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw ConfigError("cannot open '" + path + "' for writing");
        os << "rlvr-checkpoint v1\n";
        os << "step " << step_ << '\n';
        os.precision(17);
        os << "last_val " << last_val_ << '\n';
        os << "params\n";
        save_params(params_, os);
        os << "ref\n";
        save_params(ref_, os);
        os << "adam " << adam_.step_count() << '\n';
        for (double v : adam_.m()) os << v << '\n';
        for (double v : adam_.v()) os << v << '\n';
        os << "scheduler " << scheduler_->window_size() << ' '
           << scheduler_->current_eta() << '\n';
        for (double v : scheduler_->window()) os << v << '\n';
        os << "tracker " << tracker_.size() << '\n';
        for (const auto& [id, e] : tracker_.entries())
            os << id << ' ' << e.alpha << ' ' << e.beta << ' ' << e.prev_mean << '\n';
        os << "end\n";
    }

    void load_checkpoint(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open checkpoint '" + path + "'");
        std::string word, version;
        is >> word >> version;
        if (word != "rlvr-checkpoint" || version != "v1")
            throw ConfigError("unrecognized checkpoint format");
        is >> word >> step_;
        is >> word >> last_val_;
        is >> word;  // params
        params_ = load_params(is);
        is >> word;  // ref
        ref_ = load_params(is);
        long t;
        is >> word >> t;
        std::vector<double> m(params_.w.size()), v(params_.w.size());
        for (double& x : m) is >> x;
        for (double& x : v) is >> x;
        adam_.restore(std::move(m), std::move(v), t);
        int wn;
        double eta;
        is >> word >> wn >> eta;
        std::deque<double> window;
        for (int i = 0; i < wn; ++i) {
            double x;
            is >> x;
            window.push_back(x);
        }
        scheduler_->restore(window, eta);
        std::size_t tn;
        is >> word >> tn;
        tracker_ = BetaTracker();
        for (std::size_t i = 0; i < tn; ++i) {
            int id;
            BetaTracker::Entry e;
            is >> id >> e.alpha >> e.beta >> e.prev_mean;
            tracker_.set_entry(id, e);
        }
        is >> word;
        if (word != "end" || !is) throw ConfigError("checkpoint file truncated");
    }

    // --- accessors ----------------------------------------------------------

    const TrainConfig& config() const { return cfg_; }
    const TaskSuite& train_suite() const { return train_; }
    const TaskSuite& val_suite() const { return val_; }
    const PolicyParams& params() const { return params_; }
    const PolicyParams& reference() const { return ref_; }
    const BetaTracker& tracker() const { return tracker_; }
    const EtaScheduler& scheduler() const { return *scheduler_; }
    int step() const { return step_; }
    double last_val_accuracy() const { return last_val_; }

    // Test hook: direct parameter replacement (keeps snapshots value-typed).
    void set_params(PolicyParams p) { params_ = std::move(p); }
    AdamW& optimizer() { return adam_; }

private:
    bool clip_zeroes_gradient(double ratio, double adv) const {
        return (ratio > 1.0 + cfg_.clip_eps && adv > 0.0) ||
               (ratio < 1.0 - cfg_.clip_eps && adv < 0.0);
    }

    static double kl_two_sided_value(const PolicyParams& params_p, const Prompt& pp,
                                     const PolicyParams& params_q, const Prompt& pq,
                                     std::span<const int> tokens) {
        return backprop_kl_two_sided(params_p, pp, params_q, pq, tokens).first;
    }

    void init_baseline() {
        std::map<int, double> init;
        for (const Prompt& p : train_.prompts) {
            double sum = 0.0;
            for (int k = 0; k < cfg_.baseline_init_rollouts; ++k) {
                Rng rng = make_stream(cfg_.seed, stream::kBaselineInit,
                                      static_cast<std::uint64_t>(p.id),
                                      static_cast<std::uint64_t>(k));
                Rollout r = sample_rollout(params_, p, rng);
                sum += verify(p, r.tokens);
            }
            init[p.id] = sum / static_cast<double>(cfg_.baseline_init_rollouts);
        }
        tracker_ = BetaTracker::init(init, cfg_.eta_min);
    }

    std::string batch_dump(const BatchData& batch, const std::string& head) const {
        std::ostringstream dump;
        dump << head << '\n';
        dump << "batch prompts (id, reward, advantage):\n";
        for (std::size_t i = 0; i < batch.rollouts.size() && i < 64; ++i)
            dump << "  " << batch.rollouts[i].prompt_id << ' '
                 << batch.rollouts[i].reward << ' ' << batch.adv.sequence[i] << '\n';
        return dump.str();
    }

    void check_finite(double loss, std::span<const double> grad,
                      const BatchData& batch, int epoch) const {
        bool ok = std::isfinite(loss);
        std::size_t bad_idx = 0;
        if (ok) {
            for (std::size_t i = 0; i < grad.size(); ++i) {
                if (!std::isfinite(grad[i])) {
                    ok = false;
                    bad_idx = i;
                    break;
                }
            }
        }
        if (ok) return;
        std::ostringstream head;
        head << "non-finite loss or gradient\n";
        head << "step " << step_ << " epoch " << epoch << " loss " << loss
             << " first_bad_grad_index " << bad_idx;
        throw NumericalError("training aborted: non-finite loss or gradient at step " +
                                 std::to_string(step_),
                             batch_dump(batch, head.str()));
    }

    TrainConfig cfg_;
    TaskSuite train_;
    TaskSuite val_;
    PolicyParams params_;
    PolicyParams ref_;
    AdamW adam_{0};
    BetaTracker tracker_;
    std::optional<EtaScheduler> scheduler_;
    int step_ = 0;
    double last_val_ = 0.0;
};

}  // namespace rlvr
