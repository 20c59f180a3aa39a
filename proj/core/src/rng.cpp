#include "spikestrat/rng.hpp"

namespace spikestrat {

std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

std::uint64_t hash_label(std::string_view label) {
    // FNV-1a over the label bytes
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t derive(std::uint64_t seed, std::string_view label,
                     std::uint64_t i0, std::uint64_t i1, std::uint64_t i2) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ hash_label(label));
    h = mix64(h ^ i0);
    h = mix64(h ^ i1);
    h = mix64(h ^ i2);
    return h;
}

}  // namespace

rng_stream::rng_stream(std::uint64_t master_seed, std::string_view label,
                       std::uint64_t i0, std::uint64_t i1, std::uint64_t i2)
    : engine_(derive(master_seed, label, i0, i1, i2)) {}

double rng_stream::uniform01() {
    // 53-bit mantissa in [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double rng_stream::normal(double mean, double sd) {
    return mean + sd * normal_(engine_);
}

bool rng_stream::bernoulli(double p) { return uniform01() < p; }

std::uint64_t rng_stream::below(std::uint64_t n) {
    // modulo rejection keeps the draw unbiased
    std::uint64_t limit = ~0ULL - (~0ULL % n);
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return v % n;
}

}  // namespace spikestrat
