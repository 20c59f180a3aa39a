#include <doctest.h>

#include <vector>

#include "spikestrat/rng.hpp"

using spikestrat::rng_stream;

namespace {

std::vector<double> take(rng_stream r, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(r.uniform01());
    return out;
}

}  // namespace

TEST_CASE("same seed, label, and indices reproduce the stream") {
    CHECK(take(rng_stream(42, "a", 1, 2, 3), 16) == take(rng_stream(42, "a", 1, 2, 3), 16));
}

TEST_CASE("label and indices separate streams") {
    auto base = take(rng_stream(42, "a"), 8);
    CHECK(base != take(rng_stream(42, "b"), 8));
    CHECK(base != take(rng_stream(42, "a", 1), 8));
    CHECK(base != take(rng_stream(42, "a", 0, 1), 8));
    CHECK(base != take(rng_stream(42, "a", 0, 0, 1), 8));
    CHECK(base != take(rng_stream(43, "a"), 8));
}

TEST_CASE("uniform01 stays in [0, 1)") {
    rng_stream r(7, "u");
    for (int i = 0; i < 10000; ++i) {
        double v = r.uniform01();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("bernoulli respects degenerate probabilities") {
    rng_stream r(7, "b");
    for (int i = 0; i < 100; ++i) {
        CHECK_FALSE(rng_stream(7, "b0", i).bernoulli(0.0));
        CHECK(rng_stream(7, "b1", i).bernoulli(1.0));
    }
    // Frequency sanity at p = 0.3.
    int hits = 0;
    for (int i = 0; i < 20000; ++i) hits += r.bernoulli(0.3) ? 1 : 0;
    CHECK(hits / 20000.0 == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("below covers [0, n)") {
    rng_stream r(9, "i");
    std::vector<int> seen(5, 0);
    for (int i = 0; i < 5000; ++i) {
        auto v = r.below(5);
        REQUIRE(v < 5);
        ++seen[static_cast<std::size_t>(v)];
    }
    for (int count : seen) CHECK(count > 800);
}

TEST_CASE("normal moments") {
    rng_stream r(11, "n");
    double sum = 0, sumsq = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        double v = r.normal(2.0, 3.0);
        sum += v;
        sumsq += v * v;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
    CHECK(var == doctest::Approx(9.0).epsilon(0.05));
}
