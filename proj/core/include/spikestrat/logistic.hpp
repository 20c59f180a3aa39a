#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spikestrat/dataset.hpp"

namespace spikestrat {

struct logistic_model {
    double intercept = 0.0;
    std::vector<int> features;         // 0-based covariate columns, selection order
    std::vector<double> coefficients;  // aligned with features
    std::vector<double> se;            // intercept first, then coefficients
    int iterations = 0;
    double deviance = 0.0;
    double aic = 0.0;  // deviance + 2 * (parameter count incl. intercept)
    bool converged = false;
    bool separated = false;  // some |beta| exceeded 15; ridge engaged
};

// IRLS fit of Pr(y=1 | x) = sigmoid(intercept + x * beta) on the given
// predictor columns. x holds the full covariate matrix; only the listed
// feature columns enter the model. Labels must be exactly 0 or 1 with both
// classes present; covariates must be finite.
logistic_model fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const std::vector<int>& features);

// Convenience: all columns as features.
logistic_model fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// Linear predictor then sigmoid for one covariate row.
double predict_probability(const logistic_model& model, const std::vector<double>& x);

enum class score_target { propensity, prognostic };

// Fills every subject's propensity (clipped to [lo, hi]) or prognostic score
// (unclipped). Errors if a model feature is outside the dataset's columns.
dataset score_dataset(const logistic_model& model, const dataset& data,
                      score_target target, double clip_lo = 0.001,
                      double clip_hi = 0.999);

// Covariate matrix and label vector for the subjects selected by pred.
template <typename Pred>
std::pair<Eigen::MatrixXd, Eigen::VectorXd> design_from(const dataset& data, Pred pred,
                                                        bool label_is_treatment) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.subjects().size(); ++i)
        if (pred(data.subjects()[i])) rows.push_back(i);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), data.dims());
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const subject& s = data.subjects()[rows[r]];
        for (int j = 0; j < data.dims(); ++j)
            x(static_cast<Eigen::Index>(r), j) = s.x[static_cast<std::size_t>(j)];
        y(static_cast<Eigen::Index>(r)) = label_is_treatment ? s.w : s.y;
    }
    return {std::move(x), std::move(y)};
}

std::string model_to_json(const logistic_model& model);
logistic_model model_from_json(const std::string& text);

}  // namespace spikestrat
