#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spikestrat/dataset.hpp"
#include "spikestrat/estimators.hpp"
#include "spikestrat/ini.hpp"
#include "spikestrat/rng.hpp"

namespace spikestrat {

enum class effect_shape {
    constant,              // tau_i = T
    linear_bin,            // tau_i = T * k/K for true-propensity bin k
    quadratic_bin,         // tau_i = T * (k/K - 1/2)^2
    linear_propensity,     // tau_i = T * e(x_i)
    quadratic_propensity,  // tau_i = T * (e(x_i) - 1/2)^2
};
const char* to_string(effect_shape s);
std::optional<effect_shape> effect_shape_from_string(const std::string& name);

enum class enrollment_kind { random_sampling, restricted };
enum class sigma_mode { random_draw, identity, custom };

struct scenario_spec {
    long n_o = 5000;
    long n_r = 200;
    int d = 5;
    std::vector<double> gamma;  // resolved coefficient vector, size d
    std::string gamma_name;     // informational, when built from a named vector
    std::vector<double> beta;   // outcome coefficients, defaults to all ones
    effect_shape shape = effect_shape::constant;
    double noise_sd = 1.0;  // outcome noise scale; 0 gives a degenerate check case
    double target_cohens_d = 0.5;
    enrollment_kind enrollment = enrollment_kind::random_sampling;
    double restrict_x1 = -1.0;  // trial enrollment requires x1 < restrict_x1
    double restrict_x5 = -1.0;  // and x5 < restrict_x5 (restricted mode)
    double p_r = 0.5;
    int k = 20;
    int n_cov_draws = 100;
    int n_assign_draws = 20;
    sigma_mode sigma = sigma_mode::random_draw;
    std::vector<double> sigma_custom;  // row-major d*d, custom mode only
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument on bad fields
};

// The four published propensity coefficient vectors: corr3 and corr6 are
// aligned with an all-ones beta (confounded outcome), orth3 and orth6 are
// orthogonal to it; the suffix is the squared norm.
std::vector<double> named_gamma(const std::string& name);
// Gamma metadata for table row labels.
bool gamma_correlated(const std::string& name);
int gamma_norm2(const std::string& name);

// Random correlation matrix: unit diagonal, off-diagonal entries i.i.d.
// 0 with probability 1/2 and +-0.1 with probability 1/4 each, drawn on the
// upper triangle. Retries a bounded number of times if the draw is not
// positive definite, then falls back to an eigenvalue-clipped adjustment.
Eigen::MatrixXd sample_covariance(int d, rng_stream& rng);

struct source_frame {
    Eigen::MatrixXd x;            // n x d covariates
    std::vector<double> e;        // true propensity sigmoid(gamma . x)
    std::vector<double> y_c;      // control potential outcome
    std::vector<double> y_t;      // treated potential outcome
    std::vector<double> pattern;  // unit-scale effect shape g(x)
};

// Everything that stays fixed while treatment assignments are redrawn.
struct covariate_realization {
    std::uint64_t draw_index = 0;
    Eigen::MatrixXd sigma;
    source_frame odb, rct;
    double t_scale = 0.0;   // effect scale T
    double true_tau = 0.0;  // mean treated-minus-control effect over the ODB
    long rejection_attempts = 0;
};

covariate_realization draw_covariates(const scenario_spec& spec, std::uint64_t draw_index);

// Scale T so that mean(T*pattern) / sqrt((var(y_c + T*pattern) + var(y_c))/2)
// equals target_d over the set; closed form for a constant pattern, bisection
// to 1e-10 on d otherwise. Sample (n-1) variances throughout.
double cohens_d_scale(std::span<const double> y_c, std::span<const double> pattern,
                      double target_d);

// d recomputed from stored potential outcomes, same definition.
double cohens_d_of(std::span<const double> y_t, std::span<const double> y_c);

// Draw treatments (database by true propensity, trial by p_r) and package a
// dataset carrying x, both potential outcomes, the realized outcome, and the
// true propensity for every subject.
dataset assign_treatments(const scenario_spec& spec, const covariate_realization& cov,
                          std::uint64_t assign_index);

// One-call generation: first covariate draw, first assignment draw.
dataset generate_scenario(const scenario_spec& spec);

// Delta-method truth per true-propensity bin, computed from the realized
// potential outcomes: database MSE (lead bias squared plus variance) and
// trial variance. Empty bins are absent.
oracle_inputs oracle_truth(const scenario_spec& spec, const covariate_realization& cov);

// A grid of scenario rows sharing one base spec: the cross product of effect
// shapes and gamma vectors. A gamma entry is one of the published names or
// "custom", which keeps the base spec's own gamma vector.
struct scenario_grid {
    scenario_spec base;
    std::vector<effect_shape> effects;
    std::vector<std::string> gammas;
};

scenario_grid grid_from_ini(const ini_file& file);
scenario_spec row_spec(const scenario_grid& grid, effect_shape shape,
                       const std::string& gamma_name);

}  // namespace spikestrat
