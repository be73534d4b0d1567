#include <catch2/catch_amalgamated.hpp>

#include "rlvr/config.hpp"

using namespace rlvr;

TEST_CASE("empty config yields the default experiment") {
    const ExperimentSpec spec = parse_config_text("");
    REQUIRE(spec.algos.size() == 1);
    REQUIRE(spec.algos[0] == Algo::kMssr);
    REQUIRE(spec.seeds == std::vector<std::uint64_t>{7});

    const TrainConfig cfg = spec.config_for(Algo::kMssr, 7);
    REQUIRE(cfg.gamma == 0.4);
    REQUIRE(cfg.lambda == 2.0);
    REQUIRE(cfg.eta_min == 0.875);
    REQUIRE(cfg.eta_max == 0.96);
    REQUIRE(cfg.window == 20);
    REQUIRE(cfg.kl_target == 0.01);
    REQUIRE(cfg.kl_ref_coef == 0.01);
    REQUIRE(cfg.optim.weight_decay == 0.01);
    REQUIRE(cfg.steps == 300);
    REQUIRE(cfg.prompts_per_step == 256);
    REQUIRE(cfg.rollouts_per_prompt == 1);
    REQUIRE(cfg.task.vocab == 8);
    REQUIRE(cfg.task.max_len == 4);
    REQUIRE(cfg.task.d_ctx == 16);
    REQUIRE(cfg.task.count == 640);
    REQUIRE(cfg.optim.lr == 0.01);
    REQUIRE(cfg.task.seed == 7);  // follows the run seed
}

TEST_CASE("group algorithms default to G=8 at the same rollout budget") {
    const ExperimentSpec spec =
        parse_config_text("compare = grpo, rloo, reinforce_pp, mvsr, mssr\n");
    const TrainConfig grpo = spec.config_for(Algo::kGrpo, 7);
    REQUIRE(grpo.rollouts_per_prompt == 8);
    REQUIRE(grpo.prompts_per_step == 32);
    REQUIRE(grpo.rollout_budget() == 256);
    const TrainConfig mssr = spec.config_for(Algo::kMssr, 7);
    REQUIRE(mssr.rollout_budget() == 256);
    spec.validate_parity();
}

TEST_CASE("budget parity violations are rejected") {
    const std::string text =
        "compare = grpo, mssr\n"
        "grpo.prompts_per_step = 32\n"
        "grpo.rollouts_per_prompt = 8\n"
        "mssr.prompts_per_step = 128\n";
    REQUIRE_THROWS_AS(parse_config_text(text), ConfigError);

    const std::string ok =
        "compare = grpo, mssr\n"
        "grpo.prompts_per_step = 32\n"
        "grpo.rollouts_per_prompt = 8\n"
        "mssr.prompts_per_step = 256\n";
    REQUIRE_NOTHROW(parse_config_text(ok));
}

TEST_CASE("range violations are rejected with the key path") {
    REQUIRE_THROWS_AS(parse_config_text("gamma = -1\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("kl_target = 0\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("eta_min = 0.99\neta_max = 0.9\n"),
                      ConfigError);
    try {
        parse_config_text("mssr.gamma = oops\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("mssr.gamma") != std::string::npos);
    }
}

TEST_CASE("unknown keys are rejected by name") {
    try {
        parse_config_text("not_a_key = 3\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("not_a_key") != std::string::npos);
    }
    REQUIRE_THROWS_AS(parse_config_text("grpo.not_a_key = 3\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("sweep.not_an_axis = 3\n"), ConfigError);
}

TEST_CASE("lists, comments, and per-algo overrides parse") {
    const std::string text =
        "# comment line\n"
        "seeds = 3, 4, 5\n"
        "algo = mvsr   # trailing comment\n"
        "steps = 12\n"
        "mvsr.lambda = 0.5\n"
        "lambda = 1.5\n"
        "sweep.window = 5, 10\n"
        "sweep.kl_target = 0.005, 0.01\n";
    const ExperimentSpec spec = parse_config_text(text);
    REQUIRE(spec.seeds == std::vector<std::uint64_t>{3, 4, 5});
    REQUIRE(spec.algos == std::vector<Algo>{Algo::kMvsr});
    REQUIRE(spec.sweep.window == std::vector<int>{5, 10});
    REQUIRE(spec.sweep.kl_target == std::vector<double>{0.005, 0.01});
    const TrainConfig cfg = spec.config_for(Algo::kMvsr, 3);
    REQUIRE(cfg.steps == 12);
    REQUIRE(cfg.lambda == 0.5);  // per-algo override wins over base
    REQUIRE(cfg.seed == 3);
}

TEST_CASE("algo and compare are mutually exclusive; duplicates are errors") {
    REQUIRE_THROWS_AS(parse_config_text("algo = mssr\ncompare = grpo, mssr\n"),
                      ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("steps = 3\nsteps = 4\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("compare = mssr\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("algo = sarsa\n"), ConfigError);
}

TEST_CASE("explicit task seed is preserved across run seeds") {
    const ExperimentSpec spec = parse_config_text("task.seed = 99\nseeds = 1, 2\n");
    REQUIRE(spec.config_for(Algo::kMssr, 1).task.seed == 99);
    REQUIRE(spec.config_for(Algo::kMssr, 2).task.seed == 99);
}

TEST_CASE("difficulty strings parse both spellings") {
    REQUIRE(parse_config_text("task.difficulty = easy\n")
                .config_for(Algo::kMssr, 7)
                .task.difficulty == Difficulty::kEasy);
    REQUIRE(parse_config_text("task.difficulty = collapse_prone\n")
                .config_for(Algo::kMssr, 7)
                .task.difficulty == Difficulty::kCollapseProne);
    REQUIRE_THROWS_AS(parse_config_text("task.difficulty = brutal\n"), ConfigError);
}

TEST_CASE("malformed lines are reported") {
    REQUIRE_THROWS_AS(parse_config_text("steps 12\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("= 12\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("steps = twelve\n"), ConfigError);
}
