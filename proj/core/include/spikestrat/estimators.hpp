#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spikestrat/dataset.hpp"
#include "spikestrat/strata.hpp"

namespace spikestrat {

enum class method {
    odb,          // database difference of arm means per stratum
    rct,          // trial difference of arm means per stratum
    weighted,     // size-weighted convex combination of odb and rct
    spiked,       // pooled arm means over the union of both sources
    dynamic_w,    // plug-in MSE-optimal convex combination
    dual_spiked,  // spiked over propensity x prognostic composite strata
    oracle,       // combination with simulation-known MSE and variance
    naive_odb,    // unstratified database difference of arm means
};

const char* to_string(method m);
std::optional<method> method_from_string(const std::string& name);

// How a stratum-level estimate came to be, or failed to be.
enum class fallback_kind { none, odb_only, rct_only, undefined };
const char* to_string(fallback_kind f);

// What aggregate() does with strata whose estimate is undefined but whose
// weight is positive. strict errors out; renormalize reweights over the
// defined strata and reports excluded weight; cross substitutes the other
// source's estimate in place (recorded in fallback).
enum class aggregate_policy { strict, renormalize, cross };
const char* to_string(aggregate_policy p);
std::optional<aggregate_policy> policy_from_string(const std::string& name);

struct stratum_estimate {
    int stratum = 0;
    double weight = 0.0;       // plan weight
    double weight_used = 0.0;  // weight after the aggregation policy
    std::optional<double> tau;
    fallback_kind fallback = fallback_kind::none;
    long n_odb = 0, n_rct = 0;
    long n_odb_t = 0, n_odb_c = 0, n_rct_t = 0, n_rct_c = 0;
    // Plug-in lead-order diagnostics where defined for the method.
    std::optional<double> plug_bias, plug_var, plug_mse;
    std::optional<double> c_star;            // dynamic / oracle weight on the odb side
    std::optional<double> c_kt, c_kc;        // spiked pooled treated/control odb shares
    std::optional<double> delta_t, delta_c;  // odb minus rct arm-mean gaps
};

struct method_report {
    method m = method::odb;
    bool defined = false;
    double tau = 0.0;
    double excluded_weight = 0.0;
    aggregate_policy policy = aggregate_policy::strict;
    std::vector<stratum_estimate> strata;
};

struct estimate_report {
    long n_odb = 0, n_rct = 0;
    double p_r = 0.5;
    int k = 0;
    std::vector<method_report> methods;
};

// Per-stratum member indices and arm tallies, extracted once per plan.
struct stratum_arms {
    long odb_t_n = 0, odb_c_n = 0, rct_t_n = 0, rct_c_n = 0;
    double odb_t_sum = 0, odb_c_sum = 0, rct_t_sum = 0, rct_c_sum = 0;
    std::vector<std::size_t> odb_members, rct_members;
};

std::vector<stratum_arms> collect_strata(const dataset& data,
                                         const stratification_plan& plan);

// Stratum-level estimates; nullopt when an arm the method needs is empty.
std::optional<double> stratum_tau_odb(const stratum_arms& a);
std::optional<double> stratum_tau_rct(const stratum_arms& a);
std::optional<double> stratum_tau_spiked(const stratum_arms& a);
std::optional<double> stratum_tau_weighted(const stratum_arms& a);

// MSE-optimal weight on the biased estimate given its MSE and the unbiased
// estimate's variance: var / (mse + var). A zero-variance unbiased estimate
// takes all the weight; both inputs zero is an error.
double optimal_weight(double mse_biased, double var_unbiased);
// Minimum achievable MSE of the combination: mse * var / (mse + var).
double optimal_mse(double mse_biased, double var_unbiased);

struct oracle_inputs {
    // Simulation-known per-stratum truth, indexed like plan.strata.
    std::vector<std::optional<double>> mse_odb;
    std::vector<std::optional<double>> var_rct;
};

struct estimate_options {
    std::vector<method> methods;
    aggregate_policy policy = aggregate_policy::strict;
    int prognostic_bins = 3;                   // dual-spiked sub-stratification
    const oracle_inputs* oracle = nullptr;     // required for method::oracle
    const stratification_plan* composite = nullptr;  // reuse for dual-spiked
};

// Run the requested methods over one plan. dual_spiked builds (or reuses)
// the composite plan; oracle requires oracle inputs.
estimate_report estimate_all(const dataset& data, const stratification_plan& plan,
                             const rct_design& design, const estimate_options& options);

// Aggregate already-computed stratum rows under a policy. Fills weight_used,
// excluded_weight and the overall estimate. Throws std::runtime_error under
// strict policy when a positively weighted stratum is undefined.
void aggregate(method_report& report);

std::string report_to_json(const estimate_report& report);
std::string report_to_csv(const estimate_report& report);

}  // namespace spikestrat
