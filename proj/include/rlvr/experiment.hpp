#pragma once

// Experiment drivers: single runs, paired comparisons under rollout-budget
// parity, and sensitivity sweeps. Emits one metrics CSV per (config, seed)
// cell plus a merged summary.json. Every output path is a pure function of
// (spec, label, seed).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlvr/config.hpp"
#include "rlvr/trainer.hpp"

namespace rlvr {

struct RunOutput {
    Algo algo = Algo::kMssr;
    std::uint64_t seed = 0;
    std::string label;
    std::string metrics_path;
    std::string checkpoint_path;
    double final_train_acc = 0.0;
    double final_val_acc = 0.0;
    double best_val_acc = 0.0;
    double final_entropy = 0.0;
    double sampled_val_acc = 0.0;
    int steps_to_target = -1;  // first step with val_acc >= target, -1 if never
};

inline std::string metrics_filename(const std::string& label, std::uint64_t seed) {
    return "metrics_" + label + "_seed" + std::to_string(seed) + ".csv";
}

inline std::string checkpoint_filename(const std::string& label, std::uint64_t seed) {
    return "checkpoint_" + label + "_seed" + std::to_string(seed) + ".txt";
}

// Reads a metrics CSV back (header line first).
inline std::vector<MetricsRecord> load_metrics_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open metrics file '" + path + "'");
    std::string line;
    if (!std::getline(is, line) || line != MetricsRecord::csv_header())
        throw ConfigError("unrecognized metrics header in '" + path + "'");
    std::vector<MetricsRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        MetricsRecord r;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf",
                        &r.step, &r.train_acc, &r.val_acc, &r.mean_entropy,
                        &r.mean_kl_step, &r.eta, &r.mean_abs_advantage, &r.mean_bonus,
                        &r.loss, &r.clip_fraction) != 10)
            throw ConfigError("malformed metrics row in '" + path + "': " + line);
        out.push_back(r);
    }
    return out;
}

// Runs one (config, seed) cell, streaming rows to its metrics CSV and writing
// a checkpoint at the end. With resume_from set, training continues from that
// checkpoint and new rows are appended, reproducing the uninterrupted file.
inline RunOutput execute_run(const TrainConfig& cfg, const std::string& out_dir,
                             const std::string& label, double target_accuracy,
                             const std::string& resume_from = "") {
    std::filesystem::create_directories(out_dir);
    RunOutput out;
    out.algo = cfg.algo;
    out.seed = cfg.seed;
    out.label = label;
    out.metrics_path =
        (std::filesystem::path(out_dir) / metrics_filename(label, cfg.seed)).string();
    out.checkpoint_path =
        (std::filesystem::path(out_dir) / checkpoint_filename(label, cfg.seed))
            .string();

    const bool fresh = resume_from.empty();
    std::ofstream csv(out.metrics_path,
                      fresh ? std::ios::trunc : std::ios::app);
    if (!csv) throw ConfigError("cannot open '" + out.metrics_path + "' for writing");
    if (fresh) csv << MetricsRecord::csv_header() << '\n';

    Trainer trainer = fresh ? Trainer(cfg) : Trainer(cfg, resume_from);
    trainer.run([&](const MetricsRecord& rec) { csv << rec.to_csv_row() << '\n'; });
    csv.close();
    trainer.save_checkpoint(out.checkpoint_path);

    const auto metrics = load_metrics_csv(out.metrics_path);
    if (metrics.empty()) throw ConfigError("run produced no metrics rows");
    out.final_train_acc = metrics.back().train_acc;
    out.final_val_acc = metrics.back().val_acc;
    out.final_entropy = metrics.back().mean_entropy;
    for (const auto& rec : metrics) {
        out.best_val_acc = std::max(out.best_val_acc, rec.val_acc);
        if (out.steps_to_target < 0 && rec.val_acc >= target_accuracy)
            out.steps_to_target = rec.step;
    }
    out.sampled_val_acc = trainer.evaluate_sampled(trainer.val_suite(), cfg.steps);
    return out;
}

inline nlohmann::json run_to_json(const RunOutput& r) {
    nlohmann::json j;
    j["algo"] = to_string(r.algo);
    j["seed"] = r.seed;
    j["label"] = r.label;
    j["metrics_csv"] = r.metrics_path;
    j["final_train_acc"] = r.final_train_acc;
    j["final_val_acc"] = r.final_val_acc;
    j["best_val_acc"] = r.best_val_acc;
    j["final_entropy"] = r.final_entropy;
    j["sampled_val_acc"] = r.sampled_val_acc;
    j["steps_to_target"] = r.steps_to_target;
    return j;
}

inline void write_summary(const std::string& out_dir, const nlohmann::json& summary) {
    const auto path = std::filesystem::path(out_dir) / "summary.json";
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
    os << summary.dump(2) << '\n';
}

// Single runs and comparisons. Comparison cells share the task suite and
// split for a given seed (the task seed follows the run seed), so curves are
// paired across algorithms.
inline std::vector<RunOutput> run_experiment(const ExperimentSpec& spec) {
    spec.validate_parity();
    std::vector<RunOutput> runs;
    for (const Algo algo : spec.algos) {
        for (const std::uint64_t seed : spec.seeds) {
            const TrainConfig cfg = spec.config_for(algo, seed);
            runs.push_back(
                execute_run(cfg, spec.out_dir, to_string(algo), spec.target_accuracy));
            const RunOutput& r = runs.back();
            std::cout << r.label << " seed " << r.seed << ": final val "
                      << r.final_val_acc << ", steps-to-" << spec.target_accuracy
                      << " = " << r.steps_to_target << '\n';
        }
    }

    nlohmann::json summary;
    summary["target_accuracy"] = spec.target_accuracy;
    summary["rollout_budget"] =
        spec.config_for(spec.algos.front(), spec.seeds.front()).rollout_budget();
    summary["runs"] = nlohmann::json::array();
    for (const auto& r : runs) summary["runs"].push_back(run_to_json(r));

    // Per-algorithm roll-up: final accuracy and steps-to-target per seed.
    nlohmann::json algos;
    for (const Algo algo : spec.algos) {
        nlohmann::json a;
        double sum_val = 0.0;
        int n = 0;
        a["steps_to_target"] = nlohmann::json::array();
        a["final_val_acc"] = nlohmann::json::array();
        for (const auto& r : runs) {
            if (r.algo != algo) continue;
            a["steps_to_target"].push_back(r.steps_to_target);
            a["final_val_acc"].push_back(r.final_val_acc);
            sum_val += r.final_val_acc;
            ++n;
        }
        a["mean_final_val_acc"] = n ? sum_val / n : 0.0;
        algos[to_string(algo)] = a;
    }
    summary["algorithms"] = algos;
    write_summary(spec.out_dir, summary);
    return runs;
}

namespace detail {

inline std::string format_axis_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace detail

// Grid over the declared axes; one metrics file per cell. The summary table
// is sorted by mean final validation accuracy, best first.
inline std::vector<RunOutput> run_sweep(const ExperimentSpec& spec) {
    if (spec.sweep.empty())
        throw ConfigError("sweep requires at least one sweep.* axis");

    struct Cell {
        std::string suffix;
        int window = -1;
        double kl_target = -1.0, gamma = -1.0, lambda = -1.0;
    };
    std::vector<Cell> cells{{"", -1, -1.0, -1.0, -1.0}};
    auto expand = [&cells](auto&& values, auto&& apply, auto&& tag) {
        if (values.empty()) return;
        std::vector<Cell> next;
        for (const Cell& c : cells) {
            for (const auto v : values) {
                Cell nc = c;
                apply(nc, v);
                nc.suffix += "_" + tag(v);
                next.push_back(nc);
            }
        }
        cells = std::move(next);
    };
    expand(spec.sweep.window, [](Cell& c, int v) { c.window = v; },
           [](int v) { return "N" + std::to_string(v); });
    expand(spec.sweep.kl_target, [](Cell& c, double v) { c.kl_target = v; },
           [](double v) { return "kl" + detail::format_axis_value(v); });
    expand(spec.sweep.gamma, [](Cell& c, double v) { c.gamma = v; },
           [](double v) { return "g" + detail::format_axis_value(v); });
    expand(spec.sweep.lambda, [](Cell& c, double v) { c.lambda = v; },
           [](double v) { return "l" + detail::format_axis_value(v); });

    std::vector<RunOutput> runs;
    struct CellStat {
        std::string label;
        double sum_val = 0.0;
        int n = 0;
    };
    std::vector<CellStat> stats;
    for (const Algo algo : spec.algos) {
        for (const Cell& cell : cells) {
            CellStat stat;
            stat.label = std::string(to_string(algo)) + cell.suffix;
            for (const std::uint64_t seed : spec.seeds) {
                TrainConfig cfg = spec.config_for(algo, seed);
                if (cell.window > 0) cfg.window = cell.window;
                if (cell.kl_target > 0.0) cfg.kl_target = cell.kl_target;
                if (cell.gamma > 0.0) cfg.gamma = cell.gamma;
                if (cell.lambda >= 0.0 && !spec.sweep.lambda.empty())
                    cfg.lambda = cell.lambda;
                cfg.validate();
                runs.push_back(
                    execute_run(cfg, spec.out_dir, stat.label, spec.target_accuracy));
                stat.sum_val += runs.back().final_val_acc;
                ++stat.n;
            }
            stats.push_back(stat);
        }
    }

    std::stable_sort(stats.begin(), stats.end(), [](const auto& a, const auto& b) {
        return a.sum_val / a.n > b.sum_val / b.n;
    });

    nlohmann::json summary;
    summary["target_accuracy"] = spec.target_accuracy;
    summary["runs"] = nlohmann::json::array();
    for (const auto& r : runs) summary["runs"].push_back(run_to_json(r));
    summary["cells_by_final_val_acc"] = nlohmann::json::array();
    std::cout << "sweep results (mean final val acc, best first):\n";
    for (const auto& s : stats) {
        nlohmann::json c;
        c["label"] = s.label;
        c["mean_final_val_acc"] = s.sum_val / s.n;
        summary["cells_by_final_val_acc"].push_back(c);
        std::cout << "  " << s.label << ": " << s.sum_val / s.n << '\n';
    }
    write_summary(spec.out_dir, summary);
    return runs;
}

}  // namespace rlvr
