#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <sstream>

#include "rlvr/env.hpp"
#include "rlvr/rng.hpp"

using namespace rlvr;

namespace {
TaskConfig small_cfg(std::uint64_t seed, int count = 100, int vocab = 4) {
    TaskConfig cfg;
    cfg.vocab = vocab;
    cfg.max_len = 3;
    cfg.d_ctx = 12;
    cfg.questions = 4;
    cfg.count = count;
    cfg.seed = seed;
    return cfg;
}
}  // namespace

TEST_CASE("suite generation is deterministic under a fixed seed") {
    const TaskSuite a = make_task_suite(small_cfg(7));
    const TaskSuite b = make_task_suite(small_cfg(7));
    REQUIRE(a.prompts.size() == b.prompts.size());
    for (std::size_t i = 0; i < a.prompts.size(); ++i) {
        REQUIRE(a.prompts[i].id == b.prompts[i].id);
        REQUIRE(a.prompts[i].answer == b.prompts[i].answer);
        REQUIRE(a.prompts[i].question_id == b.prompts[i].question_id);
        REQUIRE(a.prompts[i].context == b.prompts[i].context);
    }
    const TaskSuite c = make_task_suite(small_cfg(8));
    bool any_differ = false;
    for (std::size_t i = 0; i < a.prompts.size(); ++i)
        any_differ = any_differ || a.prompts[i].context != c.prompts[i].context;
    REQUIRE(any_differ);
}

TEST_CASE("suite ids are unique and contiguous from zero") {
    const TaskSuite s = make_task_suite(small_cfg(3));
    for (int i = 0; i < static_cast<int>(s.prompts.size()); ++i)
        REQUIRE(s.prompts[i].id == i);
}

TEST_CASE("easy rule: argmax of a two-feature window is forced") {
    // V=2 over context (0.9, 0.1): window starts at 0, argmax is index 0.
    const int answer =
        answer_for(Difficulty::kEasy, std::vector<double>{0.9, 0.1}, 0, 2, 1);
    REQUIRE(answer == 0);
    const int answer2 =
        answer_for(Difficulty::kEasy, std::vector<double>{0.1, 0.9}, 0, 2, 1);
    REQUIRE(answer2 == 1);
}

TEST_CASE("answers are valid tokens for both difficulties") {
    for (const Difficulty d : {Difficulty::kEasy, Difficulty::kCollapseProne}) {
        TaskConfig cfg = small_cfg(11, 300, 5);
        cfg.difficulty = d;
        const TaskSuite s = make_task_suite(cfg);
        for (const Prompt& p : s.prompts) {
            REQUIRE(p.answer >= 0);
            REQUIRE(p.answer < cfg.vocab);
            REQUIRE(p.question_id >= 0);
            REQUIRE(p.question_id < cfg.questions);
            // label rule is a pure function of (context, question_id)
            REQUIRE(p.answer == answer_for(d, p.context, p.question_id, cfg.vocab,
                                           cfg.questions));
        }
    }
}

TEST_CASE("verify matches on the final token only") {
    Prompt p;
    p.answer = 2;
    REQUIRE(verify(p, std::vector<int>{0, 1, 2}) == 1);
    REQUIRE(verify(p, std::vector<int>{2, 2, 1}) == 0);
    REQUIRE(verify(p, std::vector<int>{2}) == 1);
    // pure: repeated calls agree
    REQUIRE(verify(p, std::vector<int>{0, 1, 2}) == 1);
}

TEST_CASE("verify of an empty response is 0 and bumps the counter") {
    Prompt p;
    p.answer = 0;
    const auto before = degenerate_response_count().load();
    REQUIRE(verify(p, std::vector<int>{}) == 0);
    REQUIRE(degenerate_response_count().load() == before + 1);
}

TEST_CASE("uniform random policy scores about 1/V") {
    // Monte-Carlo oracle: a uniform policy's hit rate must sit within three
    // standard errors of the analytic 1/V.
    const TaskConfig cfg = small_cfg(17, 64, 4);
    const TaskSuite s = make_task_suite(cfg);
    Rng rng = make_stream(99, stream::kValSample);
    const int n = 10000;
    double hits = 0.0;
    for (int i = 0; i < n; ++i) {
        const Prompt& p = s.prompts[rng.uniform_int(s.prompts.size())];
        std::vector<int> resp(cfg.max_len);
        for (int& t : resp) t = static_cast<int>(rng.uniform_int(cfg.vocab));
        hits += verify(p, resp);
    }
    const double p_hat = hits / n;
    const double p0 = 1.0 / cfg.vocab;
    const double se = std::sqrt(p0 * (1.0 - p0) / n);
    REQUIRE(std::abs(p_hat - p0) < 3.0 * se);
}

TEST_CASE("split is disjoint, exhaustive, and deterministic") {
    const TaskSuite s = make_task_suite(small_cfg(5, 100));
    const auto [train, val] = split(s, 0.2, 21);
    REQUIRE(train.prompts.size() == 80);
    REQUIRE(val.prompts.size() == 20);

    std::set<int> ids;
    for (const Prompt& p : train.prompts) ids.insert(p.id);
    for (const Prompt& p : val.prompts) {
        REQUIRE(ids.count(p.id) == 0);
        ids.insert(p.id);
    }
    REQUIRE(ids.size() == 100);

    const auto [train2, val2] = split(s, 0.2, 21);
    REQUIRE(train2.prompts.size() == train.prompts.size());
    for (std::size_t i = 0; i < train.prompts.size(); ++i)
        REQUIRE(train2.prompts[i].id == train.prompts[i].id);

    const auto [train3, val3] = split(s, 0.2, 22);
    bool differs = false;
    for (std::size_t i = 0; i < val.prompts.size(); ++i)
        differs = differs || val3.prompts[i].id != val.prompts[i].id;
    REQUIRE(differs);
}

TEST_CASE("split rejects out-of-range fractions") {
    const TaskSuite s = make_task_suite(small_cfg(5, 10));
    REQUIRE_THROWS_AS(split(s, 0.0, 1), ConfigError);
    REQUIRE_THROWS_AS(split(s, 1.0, 1), ConfigError);
    REQUIRE_THROWS_AS(split(s, -0.5, 1), ConfigError);
}

TEST_CASE("mask_image zeroes features, keeps labels, and is idempotent") {
    const TaskSuite s = make_task_suite(small_cfg(9, 4));
    const Prompt& p = s.prompts[2];
    const Prompt m = mask_image(p);
    REQUIRE(m.id == p.id);
    REQUIRE(m.question_id == p.question_id);
    REQUIRE(m.answer == p.answer);
    for (double c : m.context) REQUIRE(c == 0.0);
    const Prompt mm = mask_image(m);
    REQUIRE(mm.context == m.context);
    REQUIRE(mm.id == m.id);
}

TEST_CASE("config validation rejects bad dimensions") {
    TaskConfig cfg = small_cfg(1);
    cfg.vocab = 1;
    REQUIRE_THROWS_AS(make_task_suite(cfg), ConfigError);
    cfg = small_cfg(1);
    cfg.count = 0;
    REQUIRE_THROWS_AS(make_task_suite(cfg), ConfigError);
    cfg = small_cfg(1);
    cfg.max_len = 0;
    REQUIRE_THROWS_AS(make_task_suite(cfg), ConfigError);
    cfg = small_cfg(1);
    cfg.d_ctx = 2;  // below vocab for the easy rule
    cfg.questions = 2;
    cfg.difficulty = Difficulty::kEasy;
    REQUIRE_THROWS_AS(make_task_suite(cfg), ConfigError);
}

TEST_CASE("suite round-trips through the text format") {
    const TaskSuite s = make_task_suite(small_cfg(13, 20));
    std::stringstream ss;
    save_suite(s, ss);
    const TaskSuite r = load_suite(ss);
    REQUIRE(r.vocab == s.vocab);
    REQUIRE(r.max_len == s.max_len);
    REQUIRE(r.d_ctx == s.d_ctx);
    REQUIRE(r.prompts.size() == s.prompts.size());
    for (std::size_t i = 0; i < s.prompts.size(); ++i) {
        REQUIRE(r.prompts[i].id == s.prompts[i].id);
        REQUIRE(r.prompts[i].question_id == s.prompts[i].question_id);
        REQUIRE(r.prompts[i].answer == s.prompts[i].answer);
        REQUIRE(r.prompts[i].context == s.prompts[i].context);
    }
}
