#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rlvr/rng.hpp"

using namespace rlvr;

TEST_CASE("derived streams are pure functions of their key") {
    Rng a = make_stream(7, stream::kRollout, 3, 11);
    Rng b = make_stream(7, stream::kRollout, 3, 11);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different keys give different streams") {
    Rng a = make_stream(7, stream::kRollout, 3, 11);
    Rng b = make_stream(7, stream::kRollout, 3, 12);
    Rng c = make_stream(8, stream::kRollout, 3, 11);
    Rng d = make_stream(7, stream::kTaskGen, 3, 11);
    const auto x = a.next_u64();
    REQUIRE(x != b.next_u64());
    REQUIRE(x != c.next_u64());
    REQUIRE(x != d.next_u64());
}

TEST_CASE("uniform01 stays in [0, 1)") {
    Rng rng = make_stream(1, stream::kTaskGen);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("uniform_int stays in range and hits every bucket") {
    Rng rng = make_stream(2, stream::kTaskGen);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.uniform_int(7);
        REQUIRE(v < 7);
        ++counts[v];
    }
    for (int c : counts) REQUIRE(c > 0);
}

TEST_CASE("normal approximation has near-standard moments") {
    Rng rng = make_stream(3, stream::kTaskGen);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.01);
    REQUIRE(std::abs(var - 1.0) < 0.02);
}
