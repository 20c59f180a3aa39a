#include "spikestrat/estimators.hpp"

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "spikestrat/csv.hpp"
#include "spikestrat/ksum.hpp"
#include "spikestrat/moments.hpp"

namespace spikestrat {

namespace {

using ordered_json = nlohmann::ordered_json;

double arm_mean(double sum, long n) { return sum / static_cast<double>(n); }

}  // namespace

const char* to_string(method m) {
    switch (m) {
        case method::odb: return "odb";
        case method::rct: return "rct";
        case method::weighted: return "weighted";
        case method::spiked: return "spiked";
        case method::dynamic_w: return "dynamic";
        case method::dual_spiked: return "dual_spiked";
        case method::oracle: return "oracle";
        case method::naive_odb: return "naive_odb";
    }
    return "unknown";
}

std::optional<method> method_from_string(const std::string& name) {
    if (name == "odb") return method::odb;
    if (name == "rct") return method::rct;
    if (name == "weighted") return method::weighted;
    if (name == "spiked") return method::spiked;
    if (name == "dynamic") return method::dynamic_w;
    if (name == "dual_spiked" || name == "dual-spiked") return method::dual_spiked;
    if (name == "oracle") return method::oracle;
    if (name == "naive_odb" || name == "naive-odb") return method::naive_odb;
    return std::nullopt;
}

const char* to_string(fallback_kind f) {
    switch (f) {
        case fallback_kind::none: return "none";
        case fallback_kind::odb_only: return "odb_only";
        case fallback_kind::rct_only: return "rct_only";
        case fallback_kind::undefined: return "undefined";
    }
    return "unknown";
}

const char* to_string(aggregate_policy p) {
    switch (p) {
        case aggregate_policy::strict: return "strict";
        case aggregate_policy::renormalize: return "renormalize";
        case aggregate_policy::cross: return "cross";
    }
    return "unknown";
}

std::optional<aggregate_policy> policy_from_string(const std::string& name) {
    if (name == "strict") return aggregate_policy::strict;
    if (name == "renormalize") return aggregate_policy::renormalize;
    if (name == "cross") return aggregate_policy::cross;
    return std::nullopt;
}

std::vector<stratum_arms> collect_strata(const dataset& data,
                                         const stratification_plan& plan) {
    if (plan.assignment.size() != data.subjects().size())
        throw std::invalid_argument("stratification plan does not match dataset size");
    std::vector<stratum_arms> out(plan.strata.size());
    std::vector<ksum> sums(plan.strata.size() * 4);
    for (std::size_t i = 0; i < data.subjects().size(); ++i) {
        const subject& s = data.subjects()[i];
        int k = plan.assignment[i];
        if (k < 0 || static_cast<std::size_t>(k) >= out.size())
            throw std::invalid_argument("stratum assignment out of range");
        stratum_arms& a = out[static_cast<std::size_t>(k)];
        ksum* base = &sums[static_cast<std::size_t>(k) * 4];
        if (s.source == source_kind::odb) {
            a.odb_members.push_back(i);
            if (s.w == 1) { ++a.odb_t_n; base[0] += s.y; }
            else          { ++a.odb_c_n; base[1] += s.y; }
        } else {
            a.rct_members.push_back(i);
            if (s.w == 1) { ++a.rct_t_n; base[2] += s.y; }
            else          { ++a.rct_c_n; base[3] += s.y; }
        }
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k].odb_t_sum = sums[k * 4 + 0].value();
        out[k].odb_c_sum = sums[k * 4 + 1].value();
        out[k].rct_t_sum = sums[k * 4 + 2].value();
        out[k].rct_c_sum = sums[k * 4 + 3].value();
    }
    return out;
}

std::optional<double> stratum_tau_odb(const stratum_arms& a) {
    if (a.odb_t_n == 0 || a.odb_c_n == 0) return std::nullopt;
    return arm_mean(a.odb_t_sum, a.odb_t_n) - arm_mean(a.odb_c_sum, a.odb_c_n);
}

std::optional<double> stratum_tau_rct(const stratum_arms& a) {
    if (a.rct_t_n == 0 || a.rct_c_n == 0) return std::nullopt;
    return arm_mean(a.rct_t_sum, a.rct_t_n) - arm_mean(a.rct_c_sum, a.rct_c_n);
}

std::optional<double> stratum_tau_spiked(const stratum_arms& a) {
    long nt = a.odb_t_n + a.rct_t_n;
    long nc = a.odb_c_n + a.rct_c_n;
    if (nt == 0 || nc == 0) return std::nullopt;
    return arm_mean(a.odb_t_sum + a.rct_t_sum, nt) -
           arm_mean(a.odb_c_sum + a.rct_c_sum, nc);
}

std::optional<double> stratum_tau_weighted(const stratum_arms& a) {
    auto to = stratum_tau_odb(a);
    auto tr = stratum_tau_rct(a);
    if (to && tr) {
        long no = a.odb_t_n + a.odb_c_n;
        long nr = a.rct_t_n + a.rct_c_n;
        double lambda = static_cast<double>(no) / static_cast<double>(no + nr);
        return lambda * *to + (1.0 - lambda) * *tr;
    }
    if (to) return to;
    return tr;
}

double optimal_weight(double mse_biased, double var_unbiased) {
    if (mse_biased < 0 || var_unbiased < 0)
        throw std::invalid_argument("optimal_weight requires nonnegative mse and variance");
    double denom = mse_biased + var_unbiased;
    if (denom == 0)
        throw std::invalid_argument("optimal_weight is undefined when both inputs are zero");
    return var_unbiased / denom;
}

double optimal_mse(double mse_biased, double var_unbiased) {
    if (mse_biased < 0 || var_unbiased < 0)
        throw std::invalid_argument("optimal_mse requires nonnegative mse and variance");
    double denom = mse_biased + var_unbiased;
    if (denom == 0) return 0.0;
    return mse_biased * var_unbiased / denom;
}

namespace {

struct odb_plugins {
    double tau = 0, bias = 0, var = 0, mse = 0;
};

// Plug-in lead bias, variance, and MSE of the database stratum estimate.
std::optional<odb_plugins> compute_odb_plugins(const dataset& data,
                                               const stratum_arms& a) {
    if (a.odb_t_n == 0 || a.odb_c_n == 0) return std::nullopt;
    std::vector<double> p, y;
    std::vector<int> w;
    p.reserve(a.odb_members.size());
    for (std::size_t i : a.odb_members) {
        const subject& s = data.subjects()[i];
        if (!s.e) return std::nullopt;
        p.push_back(*s.e);
        w.push_back(s.w);
        y.push_back(s.y);
    }
    moment_estimate m = estimate_moments(p, w, y);
    odb_plugins out;
    out.tau = m.rho_t - m.rho_c;
    out.bias = m.s_t / (m.p_t * m.p_c);
    out.var = odb_variance_plugin(m);
    out.mse = odb_mse_plugin(m);
    return out;
}

// Plug-in variance of the trial stratum estimate; needs two subjects per arm.
std::optional<double> compute_rct_variance(const dataset& data, const stratum_arms& a,
                                           double p_r) {
    if (a.rct_t_n < 2 || a.rct_c_n < 2) return std::nullopt;
    std::vector<double> yt, yc;
    for (std::size_t i : a.rct_members) {
        const subject& s = data.subjects()[i];
        (s.w == 1 ? yt : yc).push_back(s.y);
    }
    return rct_variance_estimate(yt.size(), sample_variance(yt), yc.size(),
                                 sample_variance(yc), p_r);
}

// Combination weight with the degenerate conventions: an unavailable trial
// side sends all weight to the database estimate and vice versa; both plug-ins
// zero favors the unbiased side.
double combination_weight(double mse_odb, double var_rct) {
    if (mse_odb + var_rct == 0) return 0.0;
    double c = optimal_weight(mse_odb, var_rct);
    if (c < 0) return 0.0;
    if (c > 1) return 1.0;
    return c;
}

void fill_counts(stratum_estimate& row, const stratum_arms& a) {
    row.n_odb = a.odb_t_n + a.odb_c_n;
    row.n_rct = a.rct_t_n + a.rct_c_n;
    row.n_odb_t = a.odb_t_n;
    row.n_odb_c = a.odb_c_n;
    row.n_rct_t = a.rct_t_n;
    row.n_rct_c = a.rct_c_n;
}

void fill_arm_gaps(stratum_estimate& row, const stratum_arms& a) {
    if (a.odb_t_n > 0 && a.rct_t_n > 0)
        row.delta_t = arm_mean(a.odb_t_sum, a.odb_t_n) - arm_mean(a.rct_t_sum, a.rct_t_n);
    if (a.odb_c_n > 0 && a.rct_c_n > 0)
        row.delta_c = arm_mean(a.odb_c_sum, a.odb_c_n) - arm_mean(a.rct_c_sum, a.rct_c_n);
}

stratum_estimate make_row(method m, const dataset& data, const stratum_arms& a,
                          const rct_design& design, aggregate_policy policy,
                          const oracle_inputs* oracle, std::size_t k) {
    stratum_estimate row;
    row.stratum = static_cast<int>(k) + 1;
    fill_counts(row, a);

    auto to = stratum_tau_odb(a);
    auto tr = stratum_tau_rct(a);

    switch (m) {
        case method::naive_odb:
        case method::odb: {
            row.tau = to;
            if (to) {
                if (auto pl = compute_odb_plugins(data, a)) {
                    row.plug_bias = pl->bias;
                    row.plug_var = pl->var;
                    row.plug_mse = pl->mse;
                }
            } else if (policy == aggregate_policy::cross && tr) {
                row.tau = tr;
                row.fallback = fallback_kind::rct_only;
            }
            break;
        }
        case method::rct: {
            row.tau = tr;
            if (tr) {
                row.plug_bias = 0.0;
                row.plug_var = compute_rct_variance(data, a, design.p_r);
                if (row.plug_var) row.plug_mse = *row.plug_var;
            } else if (policy == aggregate_policy::cross && to) {
                row.tau = to;
                row.fallback = fallback_kind::odb_only;
            }
            break;
        }
        case method::spiked:
        case method::dual_spiked: {
            row.tau = stratum_tau_spiked(a);
            long nt = a.odb_t_n + a.rct_t_n;
            long nc = a.odb_c_n + a.rct_c_n;
            if (nt > 0) row.c_kt = static_cast<double>(a.odb_t_n) / static_cast<double>(nt);
            if (nc > 0) row.c_kc = static_cast<double>(a.odb_c_n) / static_cast<double>(nc);
            fill_arm_gaps(row, a);
            if (!row.tau && policy == aggregate_policy::cross) {
                if (to) { row.tau = to; row.fallback = fallback_kind::odb_only; }
                else if (tr) { row.tau = tr; row.fallback = fallback_kind::rct_only; }
            }
            break;
        }
        case method::weighted: {
            row.tau = stratum_tau_weighted(a);
            if (to && tr) {
                long no = a.odb_t_n + a.odb_c_n;
                long nr = a.rct_t_n + a.rct_c_n;
                double lambda = static_cast<double>(no) / static_cast<double>(no + nr);
                row.c_star = lambda;
                auto pl = compute_odb_plugins(data, a);
                auto vr = compute_rct_variance(data, a, design.p_r);
                if (pl && vr) {
                    row.plug_bias = lambda * pl->bias;
                    row.plug_var = lambda * lambda * pl->var +
                                   (1.0 - lambda) * (1.0 - lambda) * *vr;
                    row.plug_mse = *row.plug_bias * *row.plug_bias + *row.plug_var;
                }
            } else if (to) {
                row.fallback = fallback_kind::odb_only;
            } else if (tr) {
                row.fallback = fallback_kind::rct_only;
            }
            break;
        }
        case method::dynamic_w: {
            std::optional<odb_plugins> pl;
            if (to) pl = compute_odb_plugins(data, a);
            std::optional<double> vr;
            if (tr) vr = compute_rct_variance(data, a, design.p_r);
            if (pl && vr) {
                double c = combination_weight(pl->mse, *vr);
                row.c_star = c;
                row.tau = c * *to + (1.0 - c) * *tr;
                row.plug_bias = c * pl->bias;
                row.plug_var = c * c * pl->var + (1.0 - c) * (1.0 - c) * *vr;
                row.plug_mse = c * c * pl->mse + (1.0 - c) * (1.0 - c) * *vr;
            } else if (pl) {
                // No usable trial variance: keep the database estimate.
                row.c_star = 1.0;
                row.tau = to;
                row.fallback = fallback_kind::odb_only;
                row.plug_bias = pl->bias;
                row.plug_var = pl->var;
                row.plug_mse = pl->mse;
            } else if (tr) {
                row.c_star = 0.0;
                row.tau = tr;
                row.fallback = fallback_kind::rct_only;
            }
            break;
        }
        case method::oracle: {
            std::optional<double> mse_o, var_r;
            if (oracle) {
                if (k < oracle->mse_odb.size()) mse_o = oracle->mse_odb[k];
                if (k < oracle->var_rct.size()) var_r = oracle->var_rct[k];
            }
            if (to && mse_o && tr && var_r) {
                double c = combination_weight(*mse_o, *var_r);
                row.c_star = c;
                row.tau = c * *to + (1.0 - c) * *tr;
                row.plug_mse = c * c * *mse_o + (1.0 - c) * (1.0 - c) * *var_r;
            } else if (to && mse_o) {
                row.c_star = 1.0;
                row.tau = to;
                row.fallback = fallback_kind::odb_only;
                row.plug_mse = mse_o;
            } else if (tr && var_r) {
                row.c_star = 0.0;
                row.tau = tr;
                row.fallback = fallback_kind::rct_only;
                row.plug_mse = var_r;
            }
            break;
        }
    }
    if (!row.tau) row.fallback = fallback_kind::undefined;
    return row;
}

}  // namespace

void aggregate(method_report& report) {
    ksum defined_w;
    double total_w = 0;
    {
        ksum t;
        for (const auto& row : report.strata) t += row.weight;
        total_w = t.value();
    }
    for (auto& row : report.strata) {
        row.weight_used = 0.0;
        if (row.tau) {
            defined_w += row.weight;
        } else if (row.weight > 0 && report.policy == aggregate_policy::strict) {
            std::ostringstream os;
            os << "method " << to_string(report.m) << ": stratum " << row.stratum
               << " has weight " << row.weight
               << " but no defined estimate; merge sparse strata (--min-arm) or pick a"
                  " fallback aggregation policy (--fallback renormalize|cross)";
            throw std::runtime_error(os.str());
        }
    }
    double dw = defined_w.value();
    if (dw <= 0) {
        report.defined = false;
        report.tau = 0.0;
        report.excluded_weight = total_w;
        return;
    }
    report.excluded_weight = total_w - dw;
    ksum acc;
    if (report.excluded_weight == 0) {
        for (auto& row : report.strata) {
            if (!row.tau) continue;
            row.weight_used = row.weight;
            acc += row.weight * *row.tau;
        }
    } else {
        for (auto& row : report.strata) {
            if (!row.tau) continue;
            row.weight_used = row.weight / dw;
            acc += row.weight_used * *row.tau;
        }
    }
    report.defined = true;
    report.tau = acc.value();
}

estimate_report estimate_all(const dataset& data, const stratification_plan& plan,
                             const rct_design& design, const estimate_options& options) {
    estimate_report out;
    out.n_odb = static_cast<long>(data.n_odb());
    out.n_rct = static_cast<long>(data.n_rct());
    out.p_r = design.p_r;
    out.k = static_cast<int>(plan.strata.size());

    auto arms = collect_strata(data, plan);

    // The composite plan is only built if a dual-spiked estimate is requested.
    std::vector<stratum_arms> composite_arms;
    stratification_plan composite_local;
    const stratification_plan* composite = options.composite;
    for (method m : options.methods) {
        if (m != method::dual_spiked) continue;
        if (!composite) {
            composite_local = sub_stratify_prognostic(data, plan, options.prognostic_bins);
            composite = &composite_local;
        }
        composite_arms = collect_strata(data, *composite);
        break;
    }

    for (method m : options.methods) {
        method_report rep;
        rep.m = m;
        rep.policy = options.policy;
        if (m == method::oracle && !options.oracle)
            throw std::invalid_argument("oracle method requires per-stratum truth inputs");
        if (m == method::naive_odb) {
            stratum_arms whole;
            for (std::size_t i = 0; i < data.subjects().size(); ++i) {
                const subject& s = data.subjects()[i];
                if (s.source != source_kind::odb) continue;
                whole.odb_members.push_back(i);
                if (s.w == 1) { ++whole.odb_t_n; whole.odb_t_sum += s.y; }
                else          { ++whole.odb_c_n; whole.odb_c_sum += s.y; }
            }
            stratum_estimate row = make_row(m, data, whole, design, options.policy,
                                            nullptr, 0);
            row.weight = 1.0;
            rep.strata.push_back(std::move(row));
        } else {
            const auto& plan_ref = (m == method::dual_spiked) ? *composite : plan;
            const auto& arms_ref = (m == method::dual_spiked) ? composite_arms : arms;
            for (std::size_t k = 0; k < arms_ref.size(); ++k) {
                stratum_estimate row = make_row(m, data, arms_ref[k], design,
                                                options.policy, options.oracle, k);
                row.weight = plan_ref.strata[k].weight;
                rep.strata.push_back(std::move(row));
            }
        }
        aggregate(rep);
        out.methods.push_back(std::move(rep));
    }
    return out;
}

namespace {

ordered_json opt_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

void csv_opt(std::ostream& os, const std::optional<double>& v) {
    if (v) os << format_double(*v);
}

}  // namespace

std::string report_to_json(const estimate_report& report) {
    ordered_json root;
    root["n_odb"] = report.n_odb;
    root["n_rct"] = report.n_rct;
    root["p_r"] = report.p_r;
    root["k"] = report.k;
    root["methods"] = ordered_json::array();
    for (const auto& rep : report.methods) {
        ordered_json jm;
        jm["method"] = to_string(rep.m);
        jm["policy"] = to_string(rep.policy);
        jm["defined"] = rep.defined;
        jm["tau"] = rep.defined ? ordered_json(rep.tau) : ordered_json(nullptr);
        jm["excluded_weight"] = rep.excluded_weight;
        jm["strata"] = ordered_json::array();
        for (const auto& row : rep.strata) {
            ordered_json jr;
            jr["stratum"] = row.stratum;
            jr["weight"] = row.weight;
            jr["weight_used"] = row.weight_used;
            jr["tau"] = opt_json(row.tau);
            jr["fallback"] = to_string(row.fallback);
            jr["n_odb"] = row.n_odb;
            jr["n_odb_t"] = row.n_odb_t;
            jr["n_odb_c"] = row.n_odb_c;
            jr["n_rct"] = row.n_rct;
            jr["n_rct_t"] = row.n_rct_t;
            jr["n_rct_c"] = row.n_rct_c;
            jr["plug_bias"] = opt_json(row.plug_bias);
            jr["plug_var"] = opt_json(row.plug_var);
            jr["plug_mse"] = opt_json(row.plug_mse);
            jr["c_star"] = opt_json(row.c_star);
            jr["c_kt"] = opt_json(row.c_kt);
            jr["c_kc"] = opt_json(row.c_kc);
            jr["delta_t"] = opt_json(row.delta_t);
            jr["delta_c"] = opt_json(row.delta_c);
            jm["strata"].push_back(std::move(jr));
        }
        root["methods"].push_back(std::move(jm));
    }
    return root.dump(2) + "\n";
}

std::string report_to_csv(const estimate_report& report) {
    std::ostringstream os;
    os << "method,stratum,weight,weight_used,tau,fallback,n_odb,n_odb_t,n_odb_c,"
          "n_rct,n_rct_t,n_rct_c,plug_bias,plug_var,plug_mse,c_star,c_kt,c_kc,"
          "delta_t,delta_c\n";
    for (const auto& rep : report.methods) {
        for (const auto& row : rep.strata) {
            os << to_string(rep.m) << ',' << row.stratum << ','
               << format_double(row.weight) << ',' << format_double(row.weight_used) << ',';
            csv_opt(os, row.tau);
            os << ',' << to_string(row.fallback) << ',' << row.n_odb << ','
               << row.n_odb_t << ',' << row.n_odb_c << ',' << row.n_rct << ','
               << row.n_rct_t << ',' << row.n_rct_c << ',';
            csv_opt(os, row.plug_bias);
            os << ',';
            csv_opt(os, row.plug_var);
            os << ',';
            csv_opt(os, row.plug_mse);
            os << ',';
            csv_opt(os, row.c_star);
            os << ',';
            csv_opt(os, row.c_kt);
            os << ',';
            csv_opt(os, row.c_kc);
            os << ',';
            csv_opt(os, row.delta_t);
            os << ',';
            csv_opt(os, row.delta_c);
            os << '\n';
        }
        ksum used;
        for (const auto& row : rep.strata) used += row.weight_used;
        os << to_string(rep.m) << ",overall,,";
        os << format_double(used.value()) << ',';
        if (rep.defined) os << format_double(rep.tau);
        os << ',' << (rep.defined ? "none" : "undefined")
           << ",,,,,,,,,,,,,,\n";
    }
    return os.str();
}

}  // namespace spikestrat
