#include "spikestrat/moments.hpp"

#include <cmath>
#include <stdexcept>

#include "spikestrat/ksum.hpp"

namespace spikestrat {

stratum_moments population_moments(std::span<const double> p,
                                   std::span<const double> y_t,
                                   std::span<const double> y_c) {
    const std::size_t n = p.size();
    if (n == 0) throw std::invalid_argument("population_moments: empty set");
    if (y_t.size() != n || y_c.size() != n) {
        throw std::invalid_argument("population_moments: length mismatch");
    }

    ksum sum_t, sum_c, sum_p, sum_tp, sum_cq;
    for (std::size_t i = 0; i < n; ++i) {
        sum_t += y_t[i];
        sum_c += y_c[i];
        sum_p += p[i];
        sum_tp += y_t[i] * p[i];
        sum_cq += y_c[i] * (1.0 - p[i]);
    }
    stratum_moments m;
    m.n = n;
    const double dn = static_cast<double>(n);
    m.mu_t = sum_t.value() / dn;
    m.mu_c = sum_c.value() / dn;
    m.p_t = sum_p.value() / dn;
    m.p_c = 1.0 - m.p_t;
    if (m.p_t <= 0.0 || m.p_t >= 1.0) {
        throw std::invalid_argument("population_moments: mean treatment probability is 0 or 1");
    }
    m.s_t = sum_tp.value() / dn - m.mu_t * m.p_t;
    m.s_c = sum_cq.value() / dn - m.mu_c * m.p_c;
    m.rho_t = m.mu_t + m.s_t / m.p_t;
    m.rho_c = m.mu_c + m.s_c / m.p_c;

    ksum sum_tt, sum_cc, sum_tc;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = p[i] * (1.0 - p[i]);
        const double dt = y_t[i] - m.rho_t;
        const double dc = y_c[i] - m.rho_c;
        sum_tt += w * dt * dt;
        sum_cc += w * dc * dc;
        sum_tc += w * dt * dc;
    }
    m.s_tt = sum_tt.value() / dn;
    m.s_cc = sum_cc.value() / dn;
    m.s_tc = sum_tc.value() / dn;
    return m;
}

delta_moments delta_tau_moments(const stratum_moments& m) {
    delta_moments d;
    d.bias = m.s_t / m.p_t - m.s_c / m.p_c;
    d.variance = (m.s_tt / (m.p_t * m.p_t) + m.s_cc / (m.p_c * m.p_c) +
                  2.0 * m.s_tc / (m.p_t * m.p_c)) /
                 static_cast<double>(m.n);
    d.mse = d.bias * d.bias + d.variance;
    return d;
}

double constant_effect_bias(const stratum_moments& m) {
    return m.s_t / (m.p_t * m.p_c);
}

double rct_population_variance(std::span<const double> y_t,
                               std::span<const double> y_c, double p_r) {
    const std::size_t n = y_t.size();
    if (n == 0) throw std::invalid_argument("rct_population_variance: empty set");
    if (y_c.size() != n) throw std::invalid_argument("rct_population_variance: length mismatch");
    if (p_r <= 0.0 || p_r >= 1.0) {
        throw std::invalid_argument("rct_population_variance: p_r must lie in (0,1)");
    }
    ksum sum_t, sum_c;
    for (std::size_t i = 0; i < n; ++i) {
        sum_t += y_t[i];
        sum_c += y_c[i];
    }
    const double dn = static_cast<double>(n);
    const double mu_t = sum_t.value() / dn;
    const double mu_c = sum_c.value() / dn;
    ksum acc;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = (y_t[i] - mu_t) * (1.0 - p_r) + (y_c[i] - mu_c) * p_r;
        acc += z * z;
    }
    const double sigma_bar2 = acc.value() / dn;
    return sigma_bar2 / (dn * p_r * (1.0 - p_r));
}

ratio_moments delta_ratio_moments(double x0, double y0, double var_x, double var_y,
                                  double cov_xy) {
    if (x0 == 0.0) throw std::invalid_argument("delta_ratio_moments: x0 must be nonzero");
    ratio_moments r;
    r.ratio = y0 / x0;
    // cov(y - r x, x) = cov_xy - r var_x ; var(y - r x) = var_y - 2 r cov_xy + r^2 var_x
    r.bias_lead = r.ratio - (cov_xy - r.ratio * var_x) / (x0 * x0);
    r.variance = (var_y - 2.0 * r.ratio * cov_xy + r.ratio * r.ratio * var_x) / (x0 * x0);
    return r;
}

double spiked_bias_decomposition(double delta, double n_o, double n_r,
                                 double p_ot, double p_oc, double s_ot, double s_oc,
                                 double p_rt, double p_rc) {
    const double denom_t = n_o * p_ot + n_r * p_rt;
    const double denom_c = n_o * p_oc + n_r * p_rc;
    if (denom_t <= 0.0 || denom_c <= 0.0) {
        throw std::invalid_argument("spiked_bias_decomposition: empty pooled arm");
    }
    return delta * n_o * (p_ot / denom_t - p_oc / denom_c) + s_ot * n_o / denom_t -
           s_oc * n_o / denom_c;
}

moment_estimate estimate_moments(std::span<const double> p, std::span<const int> w,
                                 std::span<const double> y) {
    const std::size_t n = p.size();
    if (n == 0) throw std::invalid_argument("estimate_moments: empty stratum");
    if (w.size() != n || y.size() != n) {
        throw std::invalid_argument("estimate_moments: length mismatch");
    }

    moment_estimate m;
    m.n = n;
    const double dn = static_cast<double>(n);

    ksum sum_p, sum_yt, sum_yc, sum_yt_ipw, sum_yc_ipw;
    for (std::size_t i = 0; i < n; ++i) {
        if (p[i] <= 0.0 || p[i] >= 1.0) {
            throw std::invalid_argument("estimate_moments: scores must lie strictly in (0,1)");
        }
        sum_p += p[i];
        if (w[i] == 1) {
            ++m.n_treated;
            sum_yt += y[i];
            sum_yt_ipw += y[i] / p[i];
        } else {
            ++m.n_control;
            sum_yc += y[i];
            sum_yc_ipw += y[i] / (1.0 - p[i]);
        }
    }
    if (m.n_treated == 0 || m.n_control == 0) {
        throw std::invalid_argument("estimate_moments: stratum needs both arms nonempty");
    }
    m.p_t = sum_p.value() / dn;
    m.p_c = 1.0 - m.p_t;
    m.rho_t = sum_yt.value() / static_cast<double>(m.n_treated);
    m.rho_c = sum_yc.value() / static_cast<double>(m.n_control);

    // Treated-arm IPW estimate of s_t and control-arm IPW estimate of s_c,
    // combined by arm fraction with the control part negated (constant
    // within-stratum effect gives s_c = -s_t).
    const double s_t_from_t = (sum_yt.value() - m.p_t * sum_yt_ipw.value()) / dn;
    const double s_c_from_c = (sum_yc.value() - m.p_c * sum_yc_ipw.value()) / dn;
    const double frac_t = static_cast<double>(m.n_treated) / dn;
    const double frac_c = static_cast<double>(m.n_control) / dn;
    m.s_t = frac_t * s_t_from_t - frac_c * s_c_from_c;

    ksum sum_tt, sum_cc, sum_lin_t, sum_lin_c;
    for (std::size_t i = 0; i < n; ++i) {
        const double pw = p[i] * (1.0 - p[i]);
        if (w[i] == 1) {
            const double dt = y[i] - m.rho_t;
            sum_tt += pw * dt * dt;
            sum_lin_t += pw * dt;
        } else {
            const double dc = y[i] - m.rho_c;
            sum_cc += pw * dc * dc;
            sum_lin_c += pw * dc;
        }
    }
    m.s_tt = sum_tt.value() / static_cast<double>(m.n_treated);
    m.s_cc = sum_cc.value() / static_cast<double>(m.n_control);

    // Constant-effect identity for s_tc, evaluated with the plug-ins above:
    // (1/n) sum_t part + (1/n) sum_c part + s_t/(p_t p_c) * (1/n)(lin_t - lin_c).
    const double s_tc_raw = sum_tt.value() / dn + sum_cc.value() / dn +
                            m.s_t / (m.p_t * m.p_c) *
                                (sum_lin_t.value() - sum_lin_c.value()) / dn;
    const double bound = std::sqrt(m.s_tt * m.s_cc);
    m.s_tc = s_tc_raw;
    if (s_tc_raw > bound) {
        m.s_tc = bound;
        m.s_tc_clamped = true;
    } else if (s_tc_raw < -bound) {
        m.s_tc = -bound;
        m.s_tc_clamped = true;
    }
    return m;
}

double s_tc_identity(std::span<const double> p, std::span<const int> w,
                     std::span<const double> y, double rho_t, double rho_c,
                     double s_t, double p_t, double p_c) {
    const std::size_t n = p.size();
    if (n == 0) throw std::invalid_argument("s_tc_identity: empty stratum");
    if (w.size() != n || y.size() != n) {
        throw std::invalid_argument("s_tc_identity: length mismatch");
    }
    ksum quad, lin;
    for (std::size_t i = 0; i < n; ++i) {
        const double pw = p[i] * (1.0 - p[i]);
        if (w[i] == 1) {
            const double dt = y[i] - rho_t;
            quad += pw * dt * dt;
            lin += pw * dt;
        } else {
            const double dc = y[i] - rho_c;
            quad += pw * dc * dc;
            lin += -pw * dc;
        }
    }
    const double dn = static_cast<double>(n);
    return quad.value() / dn + s_t / (p_t * p_c) * lin.value() / dn;
}

double odb_variance_plugin(const moment_estimate& m) {
    return (m.s_tt / (m.p_t * m.p_t) + m.s_cc / (m.p_c * m.p_c) +
            2.0 * m.s_tc / (m.p_t * m.p_c)) /
           static_cast<double>(m.n);
}

double odb_mse_plugin(const moment_estimate& m) {
    const double bias = m.s_t / (m.p_t * m.p_c);
    return bias * bias + odb_variance_plugin(m);
}

double rct_variance_estimate(std::size_t n_treated, double var_treated,
                             std::size_t n_control, double var_control, double p_r) {
    if (n_treated < 2 || n_control < 2) {
        throw std::invalid_argument(
            "rct_variance_estimate: each arm needs at least 2 subjects for a sample variance");
    }
    if (p_r <= 0.0 || p_r >= 1.0) {
        throw std::invalid_argument("rct_variance_estimate: p_r must lie in (0,1)");
    }
    const double n = static_cast<double>(n_treated + n_control);
    const double sigma_bar2 =
        (static_cast<double>(n_treated) * var_treated +
         static_cast<double>(n_control) * var_control) / n;
    return sigma_bar2 / (p_r * (1.0 - p_r) * n);
}

double sample_variance(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 2) throw std::invalid_argument("sample_variance: need at least 2 values");
    ksum sum;
    for (double x : v) sum += x;
    const double mean = sum.value() / static_cast<double>(n);
    ksum acc;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc.value() / static_cast<double>(n - 1);
}

}  // namespace spikestrat
