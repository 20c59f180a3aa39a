#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spikestrat/dataset.hpp"
#include "spikestrat/estimators.hpp"

namespace spikestrat {

struct bootstrap_options {
    long replicates = 100;
    std::optional<long> rct_size;  // resample size; default: the full trial
    int k = 10;
    long min_arm = 1;  // sparse-stratum merge floor per replicate
    int prognostic_bins = 3;
    std::vector<method> methods = {method::naive_odb, method::odb,
                                   method::rct,       method::weighted,
                                   method::spiked,    method::dual_spiked,
                                   method::dynamic_w};
    aggregate_policy policy = aggregate_policy::renormalize;
    double p_r = 0.5;
    std::uint64_t seed = 0;
};

struct bootstrap_cell {
    method m = method::odb;
    long defined = 0;  // replicates where the method aggregated
    double mean = 0.0;
    double bias = 0.0;      // mean - reference_tau
    double variance = 0.0;  // population variance over defined replicates
    double rmse = 0.0;      // sqrt(bias^2 + variance)
};

struct bootstrap_result {
    double reference_tau = 0.0;
    long replicates = 0;
    std::vector<bootstrap_cell> cells;                       // options.methods order
    std::vector<std::vector<std::optional<double>>> draws;   // [replicate][method]
};

// Resample the database at full size and the trial at rct_size, both with
// replacement, stratify each replicate afresh (scores are taken as stored;
// prognostic sub-strata are re-derived per replicate), run every method, and
// summarize against the externally supplied reference effect.
bootstrap_result bootstrap_compare(const dataset& data, double reference_tau,
                                   const bootstrap_options& options);

std::string bootstrap_to_csv(const bootstrap_result& result);
std::string bootstrap_to_json(const bootstrap_result& result);
std::string bootstrap_to_text(const bootstrap_result& result);
std::string bootstrap_draws_to_csv(const bootstrap_result& result,
                                   const std::vector<method>& methods);

}  // namespace spikestrat
