#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spikestrat/estimators.hpp"
#include "spikestrat/scenario.hpp"

namespace spikestrat {

struct mse_cell {
    method m = method::odb;
    double mse = 0.0;
    double bias = 0.0;
    double bias2 = 0.0;
    double variance = 0.0;  // mse - bias^2, so the decomposition is exact
    long replicates = 0;
};

struct mse_row {
    effect_shape shape = effect_shape::constant;
    std::string gamma_name;
    bool correlated = false;
    int norm2 = 0;
    long total_replicates = 0;
    long excluded_replicates = 0;
    std::vector<mse_cell> cells;    // aligned with mse_table.methods
    std::vector<method> ranking;    // by MSE ascending
};

struct replicate_record {
    int row = 0;
    int cov_draw = 0;
    int assign_draw = 0;
    double true_tau = 0.0;
    bool excluded = false;
    std::vector<std::optional<double>> tau;  // aligned with mse_table.methods
};

struct mse_options {
    std::vector<method> methods = {method::odb,    method::rct,       method::weighted,
                                   method::spiked, method::dynamic_w, method::oracle};
    aggregate_policy policy = aggregate_policy::renormalize;
    int threads = 0;  // 0 picks the hardware concurrency
    bool keep_draws = false;
    // The run fails when more than this fraction of replicates is excluded.
    double max_excluded_fraction = 0.01;
};

struct mse_table {
    std::vector<method> methods;
    std::vector<mse_row> rows;
    std::vector<replicate_record> draws;  // only when keep_draws
};

// For every grid row (effect x gamma), draw n_cov_draws covariate
// realizations, redraw assignments n_assign_draws times each, run all
// requested estimators against true-propensity strata, and accumulate error
// moments against each realization's true tau. Replicates where any method
// fails to aggregate are excluded from every cell so all cells share one
// replicate set. Covariate draws run in parallel; reduction order is fixed,
// so results are identical for any thread count.
mse_table run_mse_experiment(const scenario_grid& grid, const mse_options& options);

// Short row labels used in tables: effect letter (c/l/q), correlated (y/n),
// squared norm (3/6).
std::string row_label(const mse_row& row);
char effect_letter(effect_shape shape);

std::string mse_table_to_csv(const mse_table& table);
std::string mse_table_to_json(const mse_table& table);
std::string mse_table_to_text(const mse_table& table);  // aligned, MSE per cell
mse_table mse_table_from_json(const std::string& text);
std::string draws_to_csv(const mse_table& table);

}  // namespace spikestrat
