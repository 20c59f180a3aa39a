#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace spikestrat {

// Splittable seeded RNG. Every consumer derives an independent stream from
// (master seed, label, indices); adding draws to one stream never perturbs
// another, which keeps covariate draws stable when assignment replicates are
// added. The derivation is a splitmix64 chain over the seed, a label hash,
// and the indices, feeding a mt19937_64 per stream.
class rng_stream {
public:
    rng_stream(std::uint64_t master_seed, std::string_view label,
               std::uint64_t i0 = 0, std::uint64_t i1 = 0, std::uint64_t i2 = 0);

    double uniform01();                       // in [0, 1)
    double normal(double mean = 0.0, double sd = 1.0);
    bool bernoulli(double p);                 // uniform01() < p
    // Uniform integer in [0, n); n > 0.
    std::uint64_t below(std::uint64_t n);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// Stable 64-bit mix used for stream derivation; exposed for tests.
std::uint64_t mix64(std::uint64_t x);

}  // namespace spikestrat
