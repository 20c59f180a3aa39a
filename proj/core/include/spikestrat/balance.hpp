#pragma once

#include <optional>
#include <span>
#include <vector>

#include "spikestrat/dataset.hpp"
#include "spikestrat/strata.hpp"

namespace spikestrat {

struct balance_row {
    int covariate = 0;  // 1-based column index into x
    double mean_t = 0, mean_c = 0;
    double sd_unstratified = 0;
    // Arm means reweighted by stratum size over strata where both database
    // arms are nonempty, against the same unstratified denominator.
    std::optional<double> sd_stratified;
};

struct balance_report {
    std::vector<balance_row> rows;
    // Total plan weight of the strata that entered the stratified means.
    double common_weight = 1.0;
};

// Standardized differences of covariate means between database arms. The
// denominator is sqrt of the average of the two arm sample variances (n-1).
// Pass a plan to also compute the within-stratum adjusted version.
balance_report standardized_differences(const dataset& data,
                                        const stratification_plan* plan = nullptr);

// Mahalanobis-style standardized difference for one categorical covariate
// given level proportions in each arm. When both vectors sum to one the last
// level is redundant and is dropped; levels absent from both arms are ignored.
double categorical_standardized_difference(std::span<const double> p_t,
                                           std::span<const double> p_c);

}  // namespace spikestrat
