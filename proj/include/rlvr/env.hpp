#pragma once

// Synthetic verifiable-reward tasks. Each prompt is a random feature vector
// (the "image") whose answer token is a deterministic rule of the features;
// a rule-based checker yields a binary reward. Everything here is pure and
// reproducible from the seed.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rlvr/errors.hpp"
#include "rlvr/rng.hpp"

namespace rlvr {

struct Prompt {
    int id = 0;
    std::vector<double> context;  // feature vector, the "image" input
    int question_id = 0;
    int answer = 0;  // token index in [0, vocab)
};

enum class Difficulty { kEasy, kCollapseProne };

inline const char* to_string(Difficulty d) {
    return d == Difficulty::kEasy ? "easy" : "collapse_prone";
}

inline Difficulty parse_difficulty(const std::string& s) {
    if (s == "easy") return Difficulty::kEasy;
    if (s == "collapse_prone" || s == "collapse-prone") return Difficulty::kCollapseProne;
    throw ConfigError("unknown difficulty '" + s + "' (expected easy|collapse_prone)");
}

struct TaskConfig {
    int vocab = 8;     // V
    int max_len = 4;   // T, fixed response length
    int d_ctx = 16;
    int questions = 8; // Q
    int count = 640;
    Difficulty difficulty = Difficulty::kCollapseProne;
    std::uint64_t seed = 0;
};

struct TaskSuite {
    std::vector<Prompt> prompts;
    int vocab = 0;
    int max_len = 0;
    int d_ctx = 0;
};

// The question index is itself a function of the context (argmax of the
// first Q coordinates), so the policy can observe which rule applies even
// though it only sees the feature vector.
inline int question_for_context(std::span<const double> ctx, int questions) {
    int best = 0;
    for (int j = 1; j < questions; ++j)
        if (ctx[j] > ctx[best]) best = j;
    return best;
}

// Deterministic labeling rules.
//   easy: argmax of a question-selected window of V features.
//   collapse_prone: a binary code read from sign bits. Bit 0 comes from a
//   fixed coordinate; higher bits come from question-dependent coordinates,
//   giving a difficulty ladder from "one threshold" to "full code".
inline int answer_for(Difficulty difficulty, std::span<const double> ctx,
                      int question_id, int vocab, int questions) {
    const int d_ctx = static_cast<int>(ctx.size());
    if (difficulty == Difficulty::kEasy) {
        if (d_ctx < vocab)
            throw ConfigError("easy rule needs d_ctx >= vocab");
        const int start = (question_id * vocab) % (d_ctx - vocab + 1);
        int best = start;
        for (int j = start + 1; j < start + vocab; ++j)
            if (ctx[j] > ctx[best]) best = j;
        return best - start;
    }
    // collapse_prone. Answer bits form a difficulty ladder of sign patterns
    // over fixed coordinates: bit 0 is the sign of a two-feature sum, bit 1
    // of a three-feature sum, bit 2 the parity of a pair. No single
    // coordinate determines any bit, so the optimal response stays
    // near-uniform until the combined features are learned. Overflow bits
    // (for non-power-of-two V) read question-selected coordinates just above
    // [0, Q); signs inside the question window are biased by the argmax
    // conditioning.
    int bits = 1;
    while ((1 << bits) < vocab) ++bits;
    bits += 2;  // extra bits keep code % vocab near-uniform for non-power-of-two V
    const int span = d_ctx - questions;
    if (span < 2)
        throw ConfigError("collapse_prone rule needs d_ctx >= questions + 2");
    // Fixed coordinates counted down from the top, wrapping when d_ctx is
    // small (wrapped bits stay fair, merely correlated).
    const auto fc = [&](int j) { return d_ctx - 1 - (j % span); };
    int code = ctx[fc(0)] > 0.0 ? 1 : 0;
    if (bits > 1 && ctx[fc(1)] + ctx[fc(2)] > 0.0) code |= 2;
    if (bits > 2 && (ctx[fc(3)] > 0.0) != (ctx[fc(4)] > 0.0)) code |= 4;
    for (int k = 3; k < bits; ++k) {
        const int idx = questions + (question_id + 3 * k) % span;
        if (ctx[idx] > 0.0) code |= 1 << k;
    }
    return code % vocab;
}

inline TaskSuite make_task_suite(const TaskConfig& cfg) {
    if (cfg.count < 1) throw ConfigError("task count must be >= 1");
    if (cfg.vocab < 2) throw ConfigError("vocab must be >= 2");
    if (cfg.max_len < 1) throw ConfigError("max_len must be >= 1");
    if (cfg.d_ctx < 1) throw ConfigError("d_ctx must be >= 1");
    if (cfg.questions < 1) throw ConfigError("questions must be >= 1");
    if (cfg.d_ctx < cfg.questions)
        throw ConfigError("d_ctx must be >= questions");

    TaskSuite suite;
    suite.vocab = cfg.vocab;
    suite.max_len = cfg.max_len;
    suite.d_ctx = cfg.d_ctx;
    suite.prompts.reserve(cfg.count);
    for (int i = 0; i < cfg.count; ++i) {
        Rng rng = make_stream(cfg.seed, stream::kTaskGen, static_cast<std::uint64_t>(i));
        Prompt p;
        p.id = i;
        p.context.resize(cfg.d_ctx);
        for (double& c : p.context) c = rng.normal();
        p.question_id = question_for_context(p.context, cfg.questions);
        p.answer = answer_for(cfg.difficulty, p.context, p.question_id, cfg.vocab,
                              cfg.questions);
        suite.prompts.push_back(std::move(p));
    }
    return suite;
}

// Count of empty responses seen by verify; observability only, never an error.
inline std::atomic<std::uint64_t>& degenerate_response_count() {
    static std::atomic<std::uint64_t> count{0};
    return count;
}

// Binary reward: 1 iff the final token matches the prompt's answer.
inline int verify(const Prompt& p, std::span<const int> response) {
    if (response.empty()) {
        degenerate_response_count().fetch_add(1, std::memory_order_relaxed);
        return 0;
    }
    return response.back() == p.answer ? 1 : 0;
}

inline std::pair<TaskSuite, TaskSuite> split(const TaskSuite& suite,
                                             double val_fraction,
                                             std::uint64_t seed) {
    if (suite.prompts.empty()) throw ConfigError("cannot split an empty suite");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ConfigError("val_fraction must be in (0, 1)");

    const int n = static_cast<int>(suite.prompts.size());
    int val_n = static_cast<int>(std::lround(val_fraction * n));
    val_n = std::clamp(val_n, 1, n - 1);

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng rng = make_stream(seed, stream::kSplit);
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[i], order[j]);
    }

    TaskSuite train{{}, suite.vocab, suite.max_len, suite.d_ctx};
    TaskSuite val{{}, suite.vocab, suite.max_len, suite.d_ctx};
    for (int i = 0; i < n; ++i) {
        (i < val_n ? val : train).prompts.push_back(suite.prompts[order[i]]);
    }
    // Keep original ids but a canonical order within each part.
    auto by_id = [](const Prompt& a, const Prompt& b) { return a.id < b.id; };
    std::sort(train.prompts.begin(), train.prompts.end(), by_id);
    std::sort(val.prompts.begin(), val.prompts.end(), by_id);
    return {std::move(train), std::move(val)};
}

// Zero the feature vector; the masked view for the anchor-branch regularizer.
inline Prompt mask_image(const Prompt& p) {
    Prompt out = p;
    std::fill(out.context.begin(), out.context.end(), 0.0);
    return out;
}

// Line-oriented text format: a dimension header, then one prompt per line
// (id, question_id, answer, context values).
inline void save_suite(const TaskSuite& suite, std::ostream& os) {
    os << "# vocab max_len d_ctx\n";
    os << suite.vocab << ' ' << suite.max_len << ' ' << suite.d_ctx << '\n';
    os.precision(17);
    for (const Prompt& p : suite.prompts) {
        os << p.id << ' ' << p.question_id << ' ' << p.answer;
        for (double c : p.context) os << ' ' << c;
        os << '\n';
    }
}

inline void save_suite(const TaskSuite& suite, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open '" + path + "' for writing");
    save_suite(suite, os);
}

inline TaskSuite load_suite(std::istream& is) {
    TaskSuite suite;
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("suite file is empty");
    if (!line.empty() && line[0] == '#') {
        if (!std::getline(is, line)) throw ConfigError("suite file missing dimensions");
    }
    {
        std::istringstream dims(line);
        if (!(dims >> suite.vocab >> suite.max_len >> suite.d_ctx))
            throw ConfigError("malformed suite dimension line");
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        Prompt p;
        if (!(row >> p.id >> p.question_id >> p.answer))
            throw ConfigError("malformed prompt line: " + line);
        double v;
        while (row >> v) p.context.push_back(v);
        if (static_cast<int>(p.context.size()) != suite.d_ctx)
            throw ConfigError("prompt line has wrong context width: " + line);
        suite.prompts.push_back(std::move(p));
    }
    return suite;
}

inline TaskSuite load_suite(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open '" + path + "'");
    return load_suite(is);
}

}  // namespace rlvr
