#include "spikestrat/stepwise.hpp"

#include <algorithm>
#include <stdexcept>

#include "spikestrat/auc.hpp"

namespace spikestrat {

namespace {

std::vector<int> labels_of(const Eigen::VectorXd& y) {
    std::vector<int> out(static_cast<std::size_t>(y.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i)
        out[static_cast<std::size_t>(i)] = y(i) == 1.0 ? 1 : 0;
    return out;
}

std::vector<double> predictions_on(const logistic_model& model, const Eigen::MatrixXd& x,
                                   std::span<const Eigen::Index> rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    std::vector<double> xi(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index r : rows) {
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            xi[static_cast<std::size_t>(j)] = x(r, j);
        out.push_back(predict_probability(model, xi));
    }
    return out;
}

}  // namespace

std::vector<int> forward_stepwise_aic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const std::vector<int>& candidates, int max_vars) {
    if (candidates.empty()) throw std::invalid_argument("candidate list is empty");
    std::vector<int> selected;
    if (max_vars <= 0) return selected;

    // Intercept-only deviance: binomial at the base rate.
    double rate = y.mean();
    double base_dev = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        base_dev += y(i) > 0.5 ? std::log(rate) : std::log(1.0 - rate);
    double current_aic = -2.0 * base_dev + 2.0;

    std::vector<int> remaining = candidates;
    while (static_cast<int>(selected.size()) < max_vars && !remaining.empty()) {
        double best_aic = current_aic;
        std::size_t best_pos = remaining.size();
        for (std::size_t c = 0; c < remaining.size(); ++c) {
            std::vector<int> trial = selected;
            trial.push_back(remaining[c]);
            logistic_model m = fit_logistic(x, y, trial);
            if (m.aic < best_aic) {
                best_aic = m.aic;
                best_pos = c;
            }
        }
        if (best_pos == remaining.size()) break;  // nothing reduces AIC
        selected.push_back(remaining[best_pos]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best_pos));
        current_aic = best_aic;
    }
    return selected;
}

std::vector<int> stratified_folds(const Eigen::VectorXd& y, int folds, rng_stream& rng) {
    if (folds < 2) throw std::invalid_argument("need at least two folds");
    std::vector<Eigen::Index> pos, neg;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        (y(i) == 1.0 ? pos : neg).push_back(i);
    std::vector<int> fold(static_cast<std::size_t>(y.size()), 0);
    auto deal = [&](std::vector<Eigen::Index>& idx) {
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.below(i)]);
        for (std::size_t i = 0; i < idx.size(); ++i)
            fold[static_cast<std::size_t>(idx[i])] = static_cast<int>(i % static_cast<std::size_t>(folds));
    };
    deal(pos);
    deal(neg);
    return fold;
}

auc_trace stepwise_with_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const std::vector<int>& candidates, int max_vars, int folds,
                           double min_gain, rng_stream& fold_rng) {
    auc_trace trace;
    std::vector<int> order = forward_stepwise_aic(x, y, candidates, max_vars);
    if (order.empty()) {
        trace.chosen_size = 0;
        return trace;
    }
    std::vector<int> labels = labels_of(y);
    std::vector<int> fold = stratified_folds(y, folds, fold_rng);

    std::vector<Eigen::Index> all_rows(static_cast<std::size_t>(x.rows()));
    for (std::size_t i = 0; i < all_rows.size(); ++i)
        all_rows[i] = static_cast<Eigen::Index>(i);

    std::vector<double> cv_trace;
    for (std::size_t m = 1; m <= order.size(); ++m) {
        std::vector<int> feats(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
        logistic_model full = fit_logistic(x, y, feats);
        std::vector<double> nominal = predictions_on(full, x, all_rows);

        // Pool out-of-fold predictions, then score once.
        std::vector<double> pooled_score(static_cast<std::size_t>(x.rows()));
        for (int f = 0; f < folds; ++f) {
            std::vector<Eigen::Index> train, test;
            for (Eigen::Index i = 0; i < x.rows(); ++i)
                (fold[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
            if (test.empty()) continue;
            Eigen::MatrixXd xt(static_cast<Eigen::Index>(train.size()), x.cols());
            Eigen::VectorXd yt(static_cast<Eigen::Index>(train.size()));
            for (std::size_t r = 0; r < train.size(); ++r) {
                xt.row(static_cast<Eigen::Index>(r)) = x.row(train[r]);
                yt(static_cast<Eigen::Index>(r)) = y(train[r]);
            }
            logistic_model part = fit_logistic(xt, yt, feats);
            std::vector<double> preds = predictions_on(part, x, test);
            for (std::size_t t = 0; t < test.size(); ++t)
                pooled_score[static_cast<std::size_t>(test[t])] = preds[t];
        }

        auc_trace_row row;
        row.size = static_cast<int>(m);
        row.feature = order[m - 1];
        row.aic = full.aic;
        row.nominal_auc = auc_score(nominal, labels);
        row.cv_auc = auc_score(pooled_score, labels);
        cv_trace.push_back(row.cv_auc);
        trace.rows.push_back(row);
    }
    trace.chosen_size = select_model_size(cv_trace, min_gain);
    return trace;
}

int select_model_size(std::span<const double> cv_auc, double min_gain) {
    if (cv_auc.empty()) throw std::invalid_argument("AUC trace is empty");
    for (std::size_t m = cv_auc.size(); m >= 2; --m)
        if (cv_auc[m - 1] - cv_auc[m - 2] >= min_gain) return static_cast<int>(m);
    return 1;
}

}  // namespace spikestrat
