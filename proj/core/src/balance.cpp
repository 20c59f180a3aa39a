#include "spikestrat/balance.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "spikestrat/ksum.hpp"

namespace spikestrat {

namespace {

struct arm_stats {
    long n = 0;
    std::vector<ksum> sum, sumsq;
};

}  // namespace

balance_report standardized_differences(const dataset& data,
                                        const stratification_plan* plan) {
    std::size_t d = static_cast<std::size_t>(data.dims());
    arm_stats t, c;
    t.sum.resize(d); t.sumsq.resize(d);
    c.sum.resize(d); c.sumsq.resize(d);
    for (const subject& s : data.subjects()) {
        if (s.source != source_kind::odb) continue;
        arm_stats& a = (s.w == 1) ? t : c;
        ++a.n;
        for (std::size_t j = 0; j < d; ++j) {
            a.sum[j] += s.x[j];
            a.sumsq[j] += s.x[j] * s.x[j];
        }
    }
    if (t.n < 2 || c.n < 2)
        throw std::invalid_argument(
            "standardized differences need at least two database subjects per arm");

    balance_report out;
    out.rows.resize(d);
    std::vector<double> denom(d);
    for (std::size_t j = 0; j < d; ++j) {
        balance_row& row = out.rows[j];
        row.covariate = static_cast<int>(j) + 1;
        row.mean_t = t.sum[j].value() / static_cast<double>(t.n);
        row.mean_c = c.sum[j].value() / static_cast<double>(c.n);
        double var_t = (t.sumsq[j].value() -
                        static_cast<double>(t.n) * row.mean_t * row.mean_t) /
                       static_cast<double>(t.n - 1);
        double var_c = (c.sumsq[j].value() -
                        static_cast<double>(c.n) * row.mean_c * row.mean_c) /
                       static_cast<double>(c.n - 1);
        denom[j] = std::sqrt((std::max(var_t, 0.0) + std::max(var_c, 0.0)) / 2.0);
        row.sd_unstratified = (row.mean_t - row.mean_c) / denom[j];
    }
    if (!plan) return out;

    if (plan->assignment.size() != data.subjects().size())
        throw std::invalid_argument("stratification plan does not match dataset size");

    // Per-stratum arm tallies over database subjects.
    std::size_t ks = plan->strata.size();
    std::vector<long> nt(ks, 0), nc(ks, 0);
    std::vector<std::vector<ksum>> st(ks), sc(ks);
    for (auto& v : st) v.resize(d);
    for (auto& v : sc) v.resize(d);
    for (std::size_t i = 0; i < data.subjects().size(); ++i) {
        const subject& s = data.subjects()[i];
        if (s.source != source_kind::odb) continue;
        std::size_t k = static_cast<std::size_t>(plan->assignment[i]);
        auto& n = (s.w == 1) ? nt[k] : nc[k];
        auto& sums = (s.w == 1) ? st[k] : sc[k];
        ++n;
        for (std::size_t j = 0; j < d; ++j) sums[j] += s.x[j];
    }

    // Common set: strata with both arms present; weights renormalized over it.
    ksum wsum;
    for (std::size_t k = 0; k < ks; ++k)
        if (nt[k] > 0 && nc[k] > 0) wsum += plan->strata[k].weight;
    out.common_weight = wsum.value();
    if (out.common_weight <= 0) return out;

    for (std::size_t j = 0; j < d; ++j) {
        ksum mt, mc;
        for (std::size_t k = 0; k < ks; ++k) {
            if (nt[k] == 0 || nc[k] == 0) continue;
            double w = plan->strata[k].weight / out.common_weight;
            mt += w * (st[k][j].value() / static_cast<double>(nt[k]));
            mc += w * (sc[k][j].value() / static_cast<double>(nc[k]));
        }
        out.rows[j].sd_stratified = (mt.value() - mc.value()) / denom[j];
    }
    return out;
}

double categorical_standardized_difference(std::span<const double> p_t,
                                           std::span<const double> p_c) {
    if (p_t.size() != p_c.size() || p_t.empty())
        throw std::invalid_argument("level proportions must be nonempty and equal length");
    ksum sum_t, sum_c;
    for (double v : p_t) {
        if (v < 0 || v > 1) throw std::invalid_argument("proportions must lie in [0, 1]");
        sum_t += v;
    }
    for (double v : p_c) {
        if (v < 0 || v > 1) throw std::invalid_argument("proportions must lie in [0, 1]");
        sum_c += v;
    }
    std::size_t levels = p_t.size();
    // A complete enumeration carries one redundant level.
    bool complete = std::abs(sum_t.value() - 1.0) < 1e-8 &&
                    std::abs(sum_c.value() - 1.0) < 1e-8;
    if (complete && levels > 1) --levels;

    std::vector<std::size_t> keep;
    for (std::size_t l = 0; l < levels; ++l)
        if (p_t[l] > 0 || p_c[l] > 0) keep.push_back(l);
    if (keep.empty()) return 0.0;

    Eigen::Index m = static_cast<Eigen::Index>(keep.size());
    Eigen::VectorXd diff(m);
    Eigen::MatrixXd cov(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        double ta = p_t[keep[static_cast<std::size_t>(a)]];
        double ca = p_c[keep[static_cast<std::size_t>(a)]];
        diff(a) = ta - ca;
        for (Eigen::Index b = 0; b < m; ++b) {
            double tb = p_t[keep[static_cast<std::size_t>(b)]];
            double cb = p_c[keep[static_cast<std::size_t>(b)]];
            cov(a, b) = (a == b) ? 0.5 * (ta * (1 - ta) + ca * (1 - ca))
                                 : -0.5 * (ta * tb + ca * cb);
        }
    }
    Eigen::LDLT<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("level covariance matrix is not factorizable");
    double q = diff.dot(solver.solve(diff));
    return std::sqrt(std::max(q, 0.0));
}

}  // namespace spikestrat
