// Command-line front end: run a single training configuration, compare
// algorithms under rollout-budget parity, sweep scheduler/shaping
// hyperparameters, or execute the gradient/oracle verification suites.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical abort.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rlvr/checks.hpp"
#include "rlvr/config.hpp"
#include "rlvr/experiment.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string algo;
    long seed = -1;
    int steps = -1;
    int threads = -1;

    void add_to(CLI::App* cmd, bool with_algo) {
        cmd->add_option("--config", config_path, "key-value config file");
        cmd->add_option("--seed", seed, "override the seed list with one seed");
        cmd->add_option("--out-dir", out_dir, "override the output directory");
        cmd->add_option("--steps", steps, "override the number of training steps");
        cmd->add_option("--threads", threads, "rollout-collection threads");
        if (with_algo) cmd->add_option("--algo", algo, "algorithm for this run");
    }

    rlvr::ExperimentSpec load() const {
        rlvr::ExperimentSpec spec = config_path.empty()
                                        ? rlvr::parse_config_text("")
                                        : rlvr::parse_config(config_path);
        if (seed >= 0) spec.seeds = {static_cast<std::uint64_t>(seed)};
        if (!out_dir.empty()) spec.out_dir = out_dir;
        if (steps > 0) spec.base.steps = steps;
        if (threads > 0) spec.base.num_threads = threads;
        if (!algo.empty()) {
            spec.algos = {rlvr::parse_algo(algo)};
            spec.compare_mode = false;
        }
        return spec;
    }
};

void persist_diagnostics(const std::string& out_dir, const rlvr::NumericalError& e) {
    try {
        std::filesystem::create_directories(out_dir);
        std::ofstream os(std::filesystem::path(out_dir) / "diagnostics.txt");
        os << e.what() << "\n\n" << e.diagnostics;
        std::cerr << "diagnostics written to " << out_dir << "/diagnostics.txt\n";
    } catch (...) {
        std::cerr << "failed to persist diagnostics\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale RLVR laboratory"};
    app.require_subcommand(1);

    CommonFlags run_flags, compare_flags, sweep_flags;
    std::string resume_from;
    auto* run_cmd = app.add_subcommand("run", "train one configuration");
    run_flags.add_to(run_cmd, true);
    run_cmd->add_option("--resume", resume_from,
                        "continue from a checkpoint, appending to its metrics CSV");
    auto* compare_cmd =
        app.add_subcommand("compare", "train several algorithms under budget parity");
    compare_flags.add_to(compare_cmd, false);
    auto* sweep_cmd = app.add_subcommand("sweep", "grid over sweep.* axes");
    sweep_flags.add_to(sweep_cmd, false);

    auto* check_cmd =
        app.add_subcommand("check", "run the gradient and oracle verification suites");
    std::string check_out;
    int check_samples = 50000;
    long check_seed = 7;
    check_cmd->add_option("--out", check_out, "write the JSON report here");
    check_cmd->add_option("--samples", check_samples,
                          "Monte-Carlo samples for the bias report");
    check_cmd->add_option("--seed", check_seed, "seed for the bias report");

    CLI11_PARSE(app, argc, argv);

    std::string active_out_dir = "runs/out";
    try {
        if (run_cmd->parsed()) {
            rlvr::ExperimentSpec spec = run_flags.load();
            if (spec.algos.size() != 1)
                throw rlvr::ConfigError(
                    "run expects a single algorithm; use compare for several");
            if (!resume_from.empty() && spec.seeds.size() != 1)
                throw rlvr::ConfigError("--resume needs a single seed");
            active_out_dir = spec.out_dir;
            if (resume_from.empty()) {
                rlvr::run_experiment(spec);
            } else {
                const rlvr::TrainConfig cfg =
                    spec.config_for(spec.algos.front(), spec.seeds.front());
                const auto r = rlvr::execute_run(cfg, spec.out_dir,
                                                 rlvr::to_string(cfg.algo),
                                                 spec.target_accuracy, resume_from);
                std::cout << r.label << " seed " << r.seed << ": final val "
                          << r.final_val_acc << '\n';
            }
        } else if (compare_cmd->parsed()) {
            rlvr::ExperimentSpec spec = compare_flags.load();
            if (spec.algos.size() < 2)
                throw rlvr::ConfigError(
                    "compare needs a 'compare = a,b,...' list in the config");
            active_out_dir = spec.out_dir;
            rlvr::run_experiment(spec);
        } else if (sweep_cmd->parsed()) {
            rlvr::ExperimentSpec spec = sweep_flags.load();
            active_out_dir = spec.out_dir;
            rlvr::run_sweep(spec);
        } else if (check_cmd->parsed()) {
            const auto report = rlvr::run_all_checks(
                check_samples, static_cast<std::uint64_t>(check_seed));
            if (check_out.empty()) {
                std::cout << report.dump(2) << '\n';
            } else {
                std::ofstream os(check_out);
                os << report.dump(2) << '\n';
            }
            for (const auto& c : report["checks"])
                std::cout << (c["pass"].get<bool>() ? "[PASS] " : "[FAIL] ")
                          << c["name"].get<std::string>() << '\n';
            return report["pass"].get<bool>() ? 0 : 1;
        }
    } catch (const rlvr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const rlvr::NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        persist_diagnostics(active_out_dir, e);
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
