// Hot-path benchmarks: delta-method moment tallies, the full per-replicate
// estimator pipeline, and one IRLS logistic fit at survey scale.

#include <benchmark/benchmark.h>

#include <vector>

#include "spikestrat/dataset.hpp"
#include "spikestrat/estimators.hpp"
#include "spikestrat/logistic.hpp"
#include "spikestrat/moments.hpp"
#include "spikestrat/rng.hpp"
#include "spikestrat/scenario.hpp"
#include "spikestrat/strata.hpp"

namespace {

using namespace spikestrat;

scenario_spec bench_spec() {
    scenario_spec spec;
    spec.gamma = named_gamma("corr3");
    spec.gamma_name = "corr3";
    spec.beta = std::vector<double>(5, 1.0);
    spec.seed = 17;
    return spec;
}

void bm_population_moments(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    rng_stream rng(11, "bench_moments");
    std::vector<double> p(n), yt(n), yc(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = 0.05 + 0.9 * rng.uniform01();
        yc[i] = rng.normal(0.0, 1.0);
        yt[i] = yc[i] + 0.4;
    }
    for (auto _ : state) {
        stratum_moments m = population_moments(p, yt, yc);
        benchmark::DoNotOptimize(m);
    }
}
BENCHMARK(bm_population_moments)->Arg(250)->Arg(5000);

void bm_estimate_moments(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    rng_stream rng(12, "bench_plugin");
    std::vector<double> p(n), y(n);
    std::vector<int> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = 0.05 + 0.9 * rng.uniform01();
        w[i] = rng.bernoulli(p[i]) ? 1 : 0;
        y[i] = rng.normal(w[i] != 0 ? 0.4 : 0.0, 1.0);
    }
    for (auto _ : state) {
        moment_estimate m = estimate_moments(p, w, y);
        benchmark::DoNotOptimize(m);
    }
}
BENCHMARK(bm_estimate_moments)->Arg(250)->Arg(5000);

// One simulation replicate: assignment redraw, stratification, all methods.
void bm_replicate_pipeline(benchmark::State& state) {
    scenario_spec spec = bench_spec();
    covariate_realization cov = draw_covariates(spec, 0);
    oracle_inputs oracle = oracle_truth(spec, cov);
    estimate_options options;
    options.methods = {method::odb,    method::rct,       method::weighted,
                       method::spiked, method::dynamic_w, method::oracle};
    options.policy = aggregate_policy::renormalize;
    options.oracle = &oracle;
    rct_design design;
    design.p_r = spec.p_r;
    std::uint64_t assign = 0;
    for (auto _ : state) {
        dataset data = assign_treatments(spec, cov, assign++ % 20);
        stratification_plan plan = make_equal_width_strata(data, spec.k);
        estimate_report report = estimate_all(data, plan, design, options);
        benchmark::DoNotOptimize(report);
    }
}
BENCHMARK(bm_replicate_pipeline)->Unit(benchmark::kMillisecond);

void bm_logistic_fit(benchmark::State& state) {
    scenario_spec spec = bench_spec();
    dataset data = generate_scenario(spec);
    auto [x, y] = design_from(
        data, [](const subject& s) { return s.source == source_kind::odb; }, true);
    for (auto _ : state) {
        logistic_model model = fit_logistic(x, y);
        benchmark::DoNotOptimize(model);
    }
}
BENCHMARK(bm_logistic_fit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
