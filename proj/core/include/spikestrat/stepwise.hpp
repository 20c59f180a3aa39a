#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spikestrat/logistic.hpp"
#include "spikestrat/rng.hpp"

namespace spikestrat {

struct auc_trace_row {
    int size = 0;     // model size after this addition (1-based)
    int feature = 0;  // 0-based column added at this step
    double aic = 0.0;
    double nominal_auc = 0.0;
    double cv_auc = 0.0;
};

struct auc_trace {
    std::vector<auc_trace_row> rows;  // sizes ascending, one per addition
    int chosen_size = 0;
};

// Greedy forward selection: at each step add the candidate whose addition
// most reduces AIC, breaking ties by candidate list order; stops at max_vars
// or when no addition reduces the current AIC (intercept-only to start).
std::vector<int> forward_stepwise_aic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const std::vector<int>& candidates, int max_vars);

// Forward selection plus a per-size trace: nominal AUC of the full-data fit
// and pooled out-of-fold AUC under class-stratified folds dealt from rng.
// chosen_size applies the basis-point rule below with min_gain.
auc_trace stepwise_with_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const std::vector<int>& candidates, int max_vars, int folds,
                           double min_gain, rng_stream& fold_rng);

// Largest size whose own addition raised CV AUC over the previous size by at
// least min_gain; size 1 is accepted unconditionally. cv_auc[i] is the CV AUC
// at size i+1.
int select_model_size(std::span<const double> cv_auc, double min_gain = 1e-4);

// Class-stratified fold labels in [0, folds), dealt round-robin after a
// seeded shuffle within each class.
std::vector<int> stratified_folds(const Eigen::VectorXd& y, int folds, rng_stream& rng);

}  // namespace spikestrat
