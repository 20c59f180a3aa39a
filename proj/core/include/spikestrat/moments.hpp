#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spikestrat {

// Population moments of a finite subject set with known potential outcomes
// y_t/y_c and per-subject treatment probabilities p. rho_t/rho_c are the
// probability-tilted arm levels; s_tt/s_cc/s_tc the p(1-p)-weighted second
// moments around them. All means use 1/n.
struct stratum_moments {
    std::size_t n = 0;
    double mu_t = 0, mu_c = 0;
    double p_t = 0, p_c = 0;
    double s_t = 0, s_c = 0;
    double rho_t = 0, rho_c = 0;
    double s_tt = 0, s_cc = 0, s_tc = 0;
};

// Delta-method lead-order moments of a difference-of-arm-means estimator.
// bias is the lead term of E[estimate] - (mu_t - mu_c); the neglected
// remainder is O(1/n).
struct delta_moments {
    double bias = 0;
    double variance = 0;
    double mse = 0;  // bias^2 + variance
};

stratum_moments population_moments(std::span<const double> p,
                                   std::span<const double> y_t,
                                   std::span<const double> y_c);

// Variance: (s_tt/p_t^2 + s_cc/p_c^2 + 2 s_tc/(p_t p_c)) / n.
// Bias lead term: s_t/p_t - s_c/p_c.
delta_moments delta_tau_moments(const stratum_moments& m);

// Bias lead term under a constant within-set effect (s_c = -s_t):
// s_t / (p_t p_c).
double constant_effect_bias(const stratum_moments& m);

// Variance of the randomized-trial difference of arm means with constant
// assignment probability p_r: sigma_bar^2 / (n p_r (1-p_r)), where
// sigma_bar^2 = mean of ((y_t - mu_t)(1-p_r) + (y_c - mu_c) p_r)^2.
double rct_population_variance(std::span<const double> y_t,
                               std::span<const double> y_c, double p_r);

// Delta-method moments of the ratio y/x around the point (x0, y0).
struct ratio_moments {
    double ratio = 0;      // y0 / x0
    double bias_lead = 0;  // approximation of E[y/x]
    double variance = 0;
};
ratio_moments delta_ratio_moments(double x0, double y0, double var_x, double var_y,
                                  double cov_xy);

// Lead-order bias of the pooled (spiked-in) estimator when the trial and
// database stratum means differ by delta (same gap in both arms):
//   delta * n_o * (p_ot/(n_o p_ot + n_r p_rt) - p_oc/(n_o p_oc + n_r p_rc))
//   + s_ot * n_o/(n_o p_ot + n_r p_rt) - s_oc * n_o/(n_o p_oc + n_r p_rc)
double spiked_bias_decomposition(double delta, double n_o, double n_r,
                                 double p_ot, double p_oc, double s_ot, double s_oc,
                                 double p_rt, double p_rc);

// Inverse-probability-weighted estimates of the stratum moments from one
// realized assignment. p_t/p_c come from the known scores; rho_t/rho_c are
// observed arm means; s_t combines the treated-arm estimate of s_t with the
// negated control-arm estimate of s_c (equal under a constant within-stratum
// effect), weighted by arm fractions; s_tt/s_cc are arm-weighted p(1-p)
// second moments; s_tc comes from the constant-effect identity and is
// clamped into the Cauchy-Schwarz box [-sqrt(s_tt s_cc), sqrt(s_tt s_cc)].
struct moment_estimate {
    std::size_t n = 0;
    std::size_t n_treated = 0, n_control = 0;
    double p_t = 0, p_c = 0;
    double rho_t = 0, rho_c = 0;
    double s_t = 0;
    double s_tt = 0, s_cc = 0, s_tc = 0;
    bool s_tc_clamped = false;
};

moment_estimate estimate_moments(std::span<const double> p, std::span<const int> w,
                                 std::span<const double> y);

// Constant-effect identity for s_tc evaluated at caller-supplied reference
// values (exact for every realized assignment when the within-set effect is
// constant):
//   (1/n) sum_i W_it p(1-p)(y-rho_t)^2 + (1/n) sum_i W_ic p(1-p)(y-rho_c)^2
//   + s_t/(p_t p_c) * (1/n) [sum_i W_it p(1-p)(y-rho_t) - sum_i W_ic p(1-p)(y-rho_c)]
double s_tc_identity(std::span<const double> p, std::span<const int> w,
                     std::span<const double> y, double rho_t, double rho_c,
                     double s_t, double p_t, double p_c);

// Plug-in MSE of the database stratum estimator:
// (s_t/(p_t p_c))^2 + (s_tt/p_t^2 + s_cc/p_c^2 + 2 s_tc/(p_t p_c)) / n.
double odb_mse_plugin(const moment_estimate& m);
double odb_variance_plugin(const moment_estimate& m);

// Plug-in variance of the trial stratum estimator from per-arm sample
// variances: (n_t var_t + n_c var_c) / n / (p_r (1-p_r) n).
// Requires at least 2 subjects per arm.
double rct_variance_estimate(std::size_t n_treated, double var_treated,
                             std::size_t n_control, double var_control, double p_r);

// Sample variance helper (n-1 denominator); n >= 2.
double sample_variance(std::span<const double> v);

}  // namespace spikestrat
