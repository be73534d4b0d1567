#pragma once

// Key-value experiment configuration. Lines of `key = value`, `#` comments,
// comma-separated lists. Base keys apply to every algorithm; `<algo>.<key>`
// overrides one algorithm in a comparison; `sweep.<axis>` declares sweep
// grids. Unknown keys are errors, reported with their key path.

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rlvr/errors.hpp"
#include "rlvr/trainer.hpp"

namespace rlvr {

struct SweepAxes {
    std::vector<int> window;
    std::vector<double> kl_target;
    std::vector<double> gamma;
    std::vector<double> lambda;

    bool empty() const {
        return window.empty() && kl_target.empty() && gamma.empty() && lambda.empty();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse real from '" + v + "'");
    }
}

inline long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse integer from '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': cannot parse boolean from '" + v + "'");
}

}  // namespace detail

struct ExperimentSpec {
    std::string out_dir = "runs/out";
    std::vector<std::uint64_t> seeds{7};
    std::vector<Algo> algos{Algo::kMssr};
    bool compare_mode = false;
    double target_accuracy = 0.5;
    SweepAxes sweep;
    TrainConfig base;
    bool task_seed_explicit = false;
    bool pps_explicit = false;  // prompts_per_step given at base level
    bool rpp_explicit = false;
    // Raw per-algorithm overrides, applied on top of the resolved defaults.
    std::map<std::string, std::map<std::string, std::string>> algo_overrides;

    // The fully-resolved config for one (algorithm, seed) cell. Group-based
    // algorithms default to G=8 with prompts_per_step = budget/8 so the
    // default comparison keeps rollout-budget parity.
    TrainConfig config_for(Algo algo, std::uint64_t seed) const;

    // Rollout-budget parity across all compared configurations.
    void validate_parity() const {
        if (algos.size() < 2) return;
        const std::uint64_t s = seeds.front();
        const int budget = config_for(algos.front(), s).rollout_budget();
        for (const Algo a : algos) {
            const int b = config_for(a, s).rollout_budget();
            if (b != budget)
                throw ConfigError(
                    "rollout-budget parity violated: " +
                    std::string(to_string(algos.front())) + " uses " +
                    std::to_string(budget) + " rollouts/step but " +
                    std::string(to_string(a)) + " uses " + std::to_string(b));
        }
    }
};

namespace detail {

// Applies one scalar key to a TrainConfig. `path` is the reported key path
// (with any algo prefix); returns false if the key is not a TrainConfig key.
inline bool apply_train_key(TrainConfig& cfg, const std::string& key,
                            const std::string& value, const std::string& path) {
    if (key == "steps") cfg.steps = static_cast<int>(parse_int(path, value));
    else if (key == "prompts_per_step")
        cfg.prompts_per_step = static_cast<int>(parse_int(path, value));
    else if (key == "rollouts_per_prompt")
        cfg.rollouts_per_prompt = static_cast<int>(parse_int(path, value));
    else if (key == "epochs_per_batch")
        cfg.epochs_per_batch = static_cast<int>(parse_int(path, value));
    else if (key == "clip_eps") cfg.clip_eps = parse_real(path, value);
    else if (key == "kl_ref_coef") cfg.kl_ref_coef = parse_real(path, value);
    else if (key == "entropy_loss_coef")
        cfg.entropy_loss_coef = parse_real(path, value);
    else if (key == "crossmodal_coef") cfg.crossmodal_coef = parse_real(path, value);
    else if (key == "gamma") cfg.gamma = parse_real(path, value);
    else if (key == "lambda") cfg.lambda = parse_real(path, value);
    else if (key == "cap_bonus") cfg.cap_bonus = parse_bool(path, value);
    else if (key == "normalize_advantages")
        cfg.normalize_advantages = parse_bool(path, value);
    else if (key == "eps_std") cfg.eps_std = parse_real(path, value);
    else if (key == "eta_min") cfg.eta_min = parse_real(path, value);
    else if (key == "eta_max") cfg.eta_max = parse_real(path, value);
    else if (key == "window") cfg.window = static_cast<int>(parse_int(path, value));
    else if (key == "kl_target") cfg.kl_target = parse_real(path, value);
    else if (key == "baseline_init_rollouts")
        cfg.baseline_init_rollouts = static_cast<int>(parse_int(path, value));
    else if (key == "lr") cfg.optim.lr = parse_real(path, value);
    else if (key == "beta1") cfg.optim.beta1 = parse_real(path, value);
    else if (key == "beta2") cfg.optim.beta2 = parse_real(path, value);
    else if (key == "adam_eps") cfg.optim.eps = parse_real(path, value);
    else if (key == "weight_decay") cfg.optim.weight_decay = parse_real(path, value);
    else if (key == "eval_every")
        cfg.eval_every = static_cast<int>(parse_int(path, value));
    else if (key == "num_threads")
        cfg.num_threads = static_cast<int>(parse_int(path, value));
    else if (key == "val_fraction") cfg.val_fraction = parse_real(path, value);
    else if (key == "task.vocab")
        cfg.task.vocab = static_cast<int>(parse_int(path, value));
    else if (key == "task.max_len")
        cfg.task.max_len = static_cast<int>(parse_int(path, value));
    else if (key == "task.d_ctx")
        cfg.task.d_ctx = static_cast<int>(parse_int(path, value));
    else if (key == "task.questions")
        cfg.task.questions = static_cast<int>(parse_int(path, value));
    else if (key == "task.count")
        cfg.task.count = static_cast<int>(parse_int(path, value));
    else if (key == "task.difficulty") cfg.task.difficulty = parse_difficulty(value);
    else if (key == "task.seed")
        cfg.task.seed = static_cast<std::uint64_t>(parse_int(path, value));
    else if (key == "policy.d_emb")
        cfg.policy.d_emb = static_cast<int>(parse_int(path, value));
    else if (key == "policy.d_hid")
        cfg.policy.d_hid = static_cast<int>(parse_int(path, value));
    else if (key == "policy.init_scale")
        cfg.policy.init_scale = parse_real(path, value);
    else
        return false;
    return true;
}

inline bool is_algo_name(const std::string& s) {
    return s == "grpo" || s == "rloo" || s == "reinforce_pp" || s == "mvsr" ||
           s == "mssr";
}

}  // namespace detail

inline TrainConfig ExperimentSpec::config_for(Algo algo, std::uint64_t seed) const {
    TrainConfig cfg = base;
    cfg.algo = algo;
    cfg.seed = seed;
    if (!task_seed_explicit) cfg.task.seed = seed;

    if (is_group_based(algo)) {
        const int budget = base.rollout_budget();
        if (!rpp_explicit) cfg.rollouts_per_prompt = 8;
        if (!pps_explicit) {
            if (budget % cfg.rollouts_per_prompt != 0)
                throw ConfigError(
                    "cannot derive prompts_per_step for " +
                    std::string(to_string(algo)) + ": budget " +
                    std::to_string(budget) + " is not divisible by group size " +
                    std::to_string(cfg.rollouts_per_prompt));
            cfg.prompts_per_step = budget / cfg.rollouts_per_prompt;
        }
    }

    const auto it = algo_overrides.find(to_string(algo));
    if (it != algo_overrides.end()) {
        for (const auto& [key, value] : it->second) {
            const std::string path = std::string(to_string(algo)) + "." + key;
            if (!detail::apply_train_key(cfg, key, value, path))
                throw ConfigError("unknown key '" + path + "'");
        }
    }
    cfg.validate();
    return cfg;
}

inline ExperimentSpec parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::vector<std::string> order;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) +
                                           ": empty key");
        if (kv.count(key))
            throw ConfigError("duplicate key '" + key + "'");
        kv[key] = value;
        order.push_back(key);
    }

    ExperimentSpec spec;
    bool algo_set = false, compare_set = false;
    for (const std::string& key : order) {
        const std::string& value = kv[key];
        if (key == "out_dir") {
            spec.out_dir = value;
        } else if (key == "seeds" || key == "seed") {
            spec.seeds.clear();
            for (const auto& s : detail::split_list(value))
                spec.seeds.push_back(
                    static_cast<std::uint64_t>(detail::parse_int(key, s)));
            if (spec.seeds.empty()) throw ConfigError("key 'seeds': empty list");
        } else if (key == "algo") {
            spec.algos = {parse_algo(value)};
            algo_set = true;
        } else if (key == "compare") {
            spec.algos.clear();
            for (const auto& s : detail::split_list(value))
                spec.algos.push_back(parse_algo(s));
            if (spec.algos.size() < 2)
                throw ConfigError("key 'compare': need at least two algorithms");
            spec.compare_mode = true;
            compare_set = true;
        } else if (key == "target_accuracy") {
            spec.target_accuracy = detail::parse_real(key, value);
            if (!(spec.target_accuracy > 0.0 && spec.target_accuracy <= 1.0))
                throw ConfigError("key 'target_accuracy': must be in (0, 1]");
        } else if (key == "sweep.window") {
            for (const auto& s : detail::split_list(value))
                spec.sweep.window.push_back(
                    static_cast<int>(detail::parse_int(key, s)));
        } else if (key == "sweep.kl_target") {
            for (const auto& s : detail::split_list(value))
                spec.sweep.kl_target.push_back(detail::parse_real(key, s));
        } else if (key == "sweep.gamma") {
            for (const auto& s : detail::split_list(value))
                spec.sweep.gamma.push_back(detail::parse_real(key, s));
        } else if (key == "sweep.lambda") {
            for (const auto& s : detail::split_list(value))
                spec.sweep.lambda.push_back(detail::parse_real(key, s));
        } else {
            const auto dot = key.find('.');
            const std::string head = dot == std::string::npos ? key : key.substr(0, dot);
            if (detail::is_algo_name(head)) {
                spec.algo_overrides[head][key.substr(dot + 1)] = value;
                continue;
            }
            if (key == "task.seed") spec.task_seed_explicit = true;
            if (key == "prompts_per_step") spec.pps_explicit = true;
            if (key == "rollouts_per_prompt") spec.rpp_explicit = true;
            if (!detail::apply_train_key(spec.base, key, value, key))
                throw ConfigError("unknown key '" + key + "'");
        }
    }
    if (algo_set && compare_set)
        throw ConfigError("'algo' and 'compare' are mutually exclusive");

    // Eagerly reject unknown or unparsable per-algorithm keys, even for
    // algorithms this experiment does not run.
    for (const auto& [algo_name, overrides] : spec.algo_overrides) {
        TrainConfig scratch = spec.base;
        for (const auto& [key, value] : overrides) {
            const std::string path = algo_name + "." + key;
            if (!detail::apply_train_key(scratch, key, value, path))
                throw ConfigError("unknown key '" + path + "'");
        }
    }

    // Resolve and validate every cell up front so errors surface before any
    // compute, then enforce parity across compared algorithms.
    for (const Algo a : spec.algos)
        for (const std::uint64_t s : spec.seeds) (void)spec.config_for(a, s);
    spec.validate_parity();
    return spec;
}

inline ExperimentSpec parse_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace rlvr
