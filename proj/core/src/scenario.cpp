#include "spikestrat/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spikestrat/ksum.hpp"
#include "spikestrat/moments.hpp"
#include "spikestrat/strata.hpp"

namespace spikestrat {

namespace {

double sigmoid(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

double mean_of(std::span<const double> v) {
    ksum s;
    for (double x : v) s += x;
    return ksum_mean(s, v.size());
}

// Sample covariance of two series, n-1 denominator.
double sample_covariance_of(std::span<const double> a, std::span<const double> b) {
    double ma = mean_of(a), mb = mean_of(b);
    ksum s;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s.value() / static_cast<double>(a.size() - 1);
}

}  // namespace

const char* to_string(effect_shape s) {
    switch (s) {
        case effect_shape::constant: return "constant";
        case effect_shape::linear_bin: return "linear_bin";
        case effect_shape::quadratic_bin: return "quadratic_bin";
        case effect_shape::linear_propensity: return "linear_propensity";
        case effect_shape::quadratic_propensity: return "quadratic_propensity";
    }
    return "unknown";
}

std::optional<effect_shape> effect_shape_from_string(const std::string& name) {
    if (name == "constant") return effect_shape::constant;
    if (name == "linear_bin") return effect_shape::linear_bin;
    if (name == "quadratic_bin") return effect_shape::quadratic_bin;
    if (name == "linear_propensity") return effect_shape::linear_propensity;
    if (name == "quadratic_propensity") return effect_shape::quadratic_propensity;
    return std::nullopt;
}

void scenario_spec::validate() const {
    if (n_o < 1 || n_r < 1) throw std::invalid_argument("scenario sizes must be positive");
    if (d < 1) throw std::invalid_argument("covariate dimension must be positive");
    if (gamma.size() != static_cast<std::size_t>(d))
        throw std::invalid_argument("gamma must have one entry per covariate");
    if (beta.size() != static_cast<std::size_t>(d))
        throw std::invalid_argument("beta must have one entry per covariate");
    if (!(p_r > 0 && p_r < 1))
        throw std::invalid_argument("trial assignment probability must lie in (0,1)");
    if (k < 1) throw std::invalid_argument("stratum count must be positive");
    if (n_cov_draws < 1 || n_assign_draws < 1)
        throw std::invalid_argument("draw counts must be positive");
    if (target_cohens_d < 0) throw std::invalid_argument("target effect size must be >= 0");
    if (!(noise_sd >= 0) || !std::isfinite(noise_sd))
        throw std::invalid_argument("outcome noise scale must be finite and >= 0");
    if (enrollment == enrollment_kind::restricted && d < 5)
        throw std::invalid_argument("restricted enrollment predicates x1 and x5; need d >= 5");
    if (sigma == sigma_mode::custom &&
        sigma_custom.size() != static_cast<std::size_t>(d) * static_cast<std::size_t>(d))
        throw std::invalid_argument("custom covariance must be a d*d matrix");
    for (double g : gamma)
        if (!std::isfinite(g)) throw std::invalid_argument("gamma must be finite");
    for (double b : beta)
        if (!std::isfinite(b)) throw std::invalid_argument("beta must be finite");
}

std::vector<double> named_gamma(const std::string& name) {
    const double r2 = std::sqrt(2.0);
    const double h3 = std::sqrt(3.0) / 2.0;
    const double h6 = std::sqrt(6.0) / 2.0;
    if (name == "corr3") return {1, 1, 1, 0, 0};
    if (name == "corr6") return {r2, r2, r2, 0, 0};
    if (name == "orth3") return {h3, -h3, h3, -h3, 0};
    if (name == "orth6") return {h6, -h6, h6, -h6, 0};
    throw std::invalid_argument("unknown gamma name: " + name +
                                " (expected corr3, corr6, orth3, or orth6)");
}

bool gamma_correlated(const std::string& name) {
    if (name == "corr3" || name == "corr6") return true;
    if (name == "orth3" || name == "orth6") return false;
    throw std::invalid_argument("unknown gamma name: " + name);
}

int gamma_norm2(const std::string& name) {
    if (name == "corr3" || name == "orth3") return 3;
    if (name == "corr6" || name == "orth6") return 6;
    throw std::invalid_argument("unknown gamma name: " + name);
}

Eigen::MatrixXd sample_covariance(int d, rng_stream& rng) {
    if (d < 1) throw std::invalid_argument("dimension must be positive");
    for (int attempt = 0; attempt < 64; ++attempt) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d);
        for (int i = 0; i < d; ++i) {
            for (int j = i + 1; j < d; ++j) {
                double u = rng.uniform01();
                double v = u < 0.5 ? 0.0 : (u < 0.75 ? 0.1 : -0.1);
                m(i, j) = m(j, i) = v;
            }
        }
        if (Eigen::LLT<Eigen::MatrixXd>(m).info() == Eigen::Success) return m;
        if (attempt < 63) continue;
        // Nearest-PD style fallback: clip eigenvalues, renormalize to unit
        // diagonal. Unreachable for |off-diagonal| <= 0.1 at small d.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
        Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(1e-6);
        Eigen::MatrixXd fixed =
            eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
        Eigen::VectorXd scale = fixed.diagonal().cwiseSqrt().cwiseInverse();
        fixed = scale.asDiagonal() * fixed * scale.asDiagonal();
        if (Eigen::LLT<Eigen::MatrixXd>(fixed).info() == Eigen::Success) return fixed;
        throw std::runtime_error("could not produce a positive definite covariance");
    }
    throw std::runtime_error("could not produce a positive definite covariance");
}

double cohens_d_scale(std::span<const double> y_c, std::span<const double> pattern,
                      double target_d) {
    if (y_c.size() != pattern.size())
        throw std::invalid_argument("outcomes and effect pattern differ in length");
    if (y_c.size() < 2)
        throw std::invalid_argument("effect scaling needs at least two subjects");
    if (target_d < 0) throw std::invalid_argument("target effect size must be >= 0");
    double mean_g = mean_of(pattern);
    if (mean_g <= 0)
        throw std::invalid_argument("effect pattern must have positive mean");
    if (target_d == 0) return 0.0;

    double var_c = sample_variance(y_c);
    bool constant = std::all_of(pattern.begin(), pattern.end(),
                                [&](double g) { return g == pattern[0]; });
    if (constant) return target_d * std::sqrt(var_c) / pattern[0];

    double var_g = sample_variance(pattern);
    double cov_cg = sample_covariance_of(y_c, pattern);
    auto d_at = [&](double t) {
        double var_t = var_c + 2.0 * t * cov_cg + t * t * var_g;
        return t * mean_g / std::sqrt((var_t + var_c) / 2.0);
    };

    double hi = 1.0;
    while (d_at(hi) < target_d) {
        hi *= 2.0;
        if (hi > 1e14)
            throw std::runtime_error("target effect size unreachable for this pattern");
    }
    double lo = 0.0;
    double mid = hi / 2.0;
    for (int it = 0; it < 200; ++it) {
        mid = (lo + hi) / 2.0;
        double d = d_at(mid);
        if (std::abs(d - target_d) < 1e-10) return mid;
        (d < target_d ? lo : hi) = mid;
    }
    return mid;
}

double cohens_d_of(std::span<const double> y_t, std::span<const double> y_c) {
    if (y_t.size() != y_c.size() || y_t.size() < 2)
        throw std::invalid_argument("need matched potential outcomes, at least two");
    ksum diff;
    for (std::size_t i = 0; i < y_t.size(); ++i) diff += y_t[i] - y_c[i];
    double mean_eff = ksum_mean(diff, y_t.size());
    double sd = std::sqrt((sample_variance(y_t) + sample_variance(y_c)) / 2.0);
    return mean_eff / sd;
}

namespace {

double pattern_of(const scenario_spec& spec, double e) {
    switch (spec.shape) {
        case effect_shape::constant: return 1.0;
        case effect_shape::linear_bin:
            return static_cast<double>(bin_of_score(e, spec.k)) /
                   static_cast<double>(spec.k);
        case effect_shape::quadratic_bin: {
            double frac = static_cast<double>(bin_of_score(e, spec.k)) /
                          static_cast<double>(spec.k);
            return (frac - 0.5) * (frac - 0.5);
        }
        case effect_shape::linear_propensity: return e;
        case effect_shape::quadratic_propensity: return (e - 0.5) * (e - 0.5);
    }
    return 1.0;
}

Eigen::MatrixXd resolve_sigma(const scenario_spec& spec, std::uint64_t draw_index) {
    switch (spec.sigma) {
        case sigma_mode::identity: return Eigen::MatrixXd::Identity(spec.d, spec.d);
        case sigma_mode::custom: {
            Eigen::MatrixXd m(spec.d, spec.d);
            for (int i = 0; i < spec.d; ++i)
                for (int j = 0; j < spec.d; ++j)
                    m(i, j) = spec.sigma_custom[static_cast<std::size_t>(i * spec.d + j)];
            if (!m.isApprox(m.transpose()))
                throw std::invalid_argument("custom covariance must be symmetric");
            if (Eigen::LLT<Eigen::MatrixXd>(m).info() != Eigen::Success)
                throw std::invalid_argument("custom covariance must be positive definite");
            return m;
        }
        case sigma_mode::random_draw: {
            rng_stream rng(spec.seed, "sigma", draw_index);
            return sample_covariance(spec.d, rng);
        }
    }
    throw std::logic_error("unhandled sigma mode");
}

}  // namespace

covariate_realization draw_covariates(const scenario_spec& spec, std::uint64_t draw_index) {
    spec.validate();
    covariate_realization cov;
    cov.draw_index = draw_index;
    cov.sigma = resolve_sigma(spec, draw_index);
    Eigen::LLT<Eigen::MatrixXd> llt(cov.sigma);
    Eigen::MatrixXd chol = llt.matrixL();
    Eigen::Map<const Eigen::VectorXd> gamma(spec.gamma.data(), spec.d);
    Eigen::Map<const Eigen::VectorXd> beta(spec.beta.data(), spec.d);

    auto fill = [&](source_frame& frame, long n, rng_stream& rng, bool restricted) {
        frame.x.resize(n, spec.d);
        frame.e.resize(static_cast<std::size_t>(n));
        frame.y_c.resize(static_cast<std::size_t>(n));
        frame.pattern.resize(static_cast<std::size_t>(n));
        Eigen::VectorXd z(spec.d);
        for (long i = 0; i < n; ++i) {
            Eigen::VectorXd x;
            while (true) {
                for (int j = 0; j < spec.d; ++j) z(j) = rng.normal();
                x = chol * z;
                if (!restricted) break;
                ++cov.rejection_attempts;
                if (x(0) < spec.restrict_x1 && x(4) < spec.restrict_x5) break;
                if (cov.rejection_attempts > 10000 &&
                    static_cast<double>(i) <
                        1e-4 * static_cast<double>(cov.rejection_attempts))
                    throw std::runtime_error(
                        "trial enrollment acceptance rate below 1e-4; loosen the"
                        " restriction thresholds");
            }
            double eps = spec.noise_sd * rng.normal();
            frame.x.row(i) = x.transpose();
            std::size_t ui = static_cast<std::size_t>(i);
            frame.e[ui] = sigmoid(gamma.dot(x));
            frame.y_c[ui] = beta.dot(x) + eps;
            frame.pattern[ui] = pattern_of(spec, frame.e[ui]);
        }
    };

    {
        rng_stream rng(spec.seed, "cov_odb", draw_index);
        fill(cov.odb, spec.n_o, rng, false);
    }
    {
        rng_stream rng(spec.seed, "cov_rct", draw_index);
        fill(cov.rct, spec.n_r, rng, spec.enrollment == enrollment_kind::restricted);
    }

    cov.t_scale = cohens_d_scale(cov.odb.y_c, cov.odb.pattern, spec.target_cohens_d);
    auto apply_effect = [&](source_frame& frame) {
        frame.y_t.resize(frame.y_c.size());
        for (std::size_t i = 0; i < frame.y_c.size(); ++i)
            frame.y_t[i] = frame.y_c[i] + cov.t_scale * frame.pattern[i];
    };
    apply_effect(cov.odb);
    apply_effect(cov.rct);
    cov.true_tau = cov.t_scale * mean_of(cov.odb.pattern);
    return cov;
}

dataset assign_treatments(const scenario_spec& spec, const covariate_realization& cov,
                          std::uint64_t assign_index) {
    rng_stream rng_o(spec.seed, "assign_odb", cov.draw_index, assign_index);
    rng_stream rng_r(spec.seed, "assign_rct", cov.draw_index, assign_index);
    std::vector<subject> subjects;
    subjects.reserve(cov.odb.y_c.size() + cov.rct.y_c.size());
    auto emit = [&](const source_frame& frame, source_kind kind, rng_stream& rng,
                    bool by_propensity) {
        const char prefix = kind == source_kind::odb ? 'o' : 'r';
        for (std::size_t i = 0; i < frame.y_c.size(); ++i) {
            subject s;
            s.id = prefix + std::to_string(i + 1);
            s.source = kind;
            s.w = rng.bernoulli(by_propensity ? frame.e[i] : spec.p_r) ? 1 : 0;
            s.y_t = frame.y_t[i];
            s.y_c = frame.y_c[i];
            s.y = s.w == 1 ? frame.y_t[i] : frame.y_c[i];
            s.e = frame.e[i];
            s.x.resize(static_cast<std::size_t>(spec.d));
            for (int j = 0; j < spec.d; ++j)
                s.x[static_cast<std::size_t>(j)] = frame.x(static_cast<Eigen::Index>(i), j);
            subjects.push_back(std::move(s));
        }
    };
    emit(cov.odb, source_kind::odb, rng_o, true);
    emit(cov.rct, source_kind::rct, rng_r, false);
    return dataset(std::move(subjects), spec.d);
}

dataset generate_scenario(const scenario_spec& spec) {
    return assign_treatments(spec, draw_covariates(spec, 0), 0);
}

oracle_inputs oracle_truth(const scenario_spec& spec, const covariate_realization& cov) {
    oracle_inputs truth;
    std::size_t ks = static_cast<std::size_t>(spec.k);
    truth.mse_odb.assign(ks, std::nullopt);
    truth.var_rct.assign(ks, std::nullopt);

    std::vector<std::vector<std::size_t>> odb_bins(ks), rct_bins(ks);
    for (std::size_t i = 0; i < cov.odb.e.size(); ++i)
        odb_bins[static_cast<std::size_t>(bin_of_score(cov.odb.e[i], spec.k) - 1)]
            .push_back(i);
    for (std::size_t i = 0; i < cov.rct.e.size(); ++i)
        rct_bins[static_cast<std::size_t>(bin_of_score(cov.rct.e[i], spec.k) - 1)]
            .push_back(i);

    for (std::size_t b = 0; b < ks; ++b) {
        if (!odb_bins[b].empty()) {
            std::vector<double> p, yt, yc;
            p.reserve(odb_bins[b].size());
            for (std::size_t i : odb_bins[b]) {
                p.push_back(cov.odb.e[i]);
                yt.push_back(cov.odb.y_t[i]);
                yc.push_back(cov.odb.y_c[i]);
            }
            truth.mse_odb[b] = delta_tau_moments(population_moments(p, yt, yc)).mse;
        }
        if (!rct_bins[b].empty()) {
            std::vector<double> yt, yc;
            for (std::size_t i : rct_bins[b]) {
                yt.push_back(cov.rct.y_t[i]);
                yc.push_back(cov.rct.y_c[i]);
            }
            truth.var_rct[b] = rct_population_variance(yt, yc, spec.p_r);
        }
    }
    return truth;
}

scenario_grid grid_from_ini(const ini_file& file) {
    scenario_grid grid;
    scenario_spec& base = grid.base;
    base.n_o = ini_long(file, "scenario.n_o", base.n_o);
    base.n_r = ini_long(file, "scenario.n_r", base.n_r);
    base.d = static_cast<int>(ini_long(file, "scenario.d", base.d));
    base.p_r = ini_double(file, "scenario.p_r", base.p_r);
    base.k = static_cast<int>(ini_long(file, "scenario.k", base.k));
    base.n_cov_draws =
        static_cast<int>(ini_long(file, "scenario.cov_draws", base.n_cov_draws));
    base.n_assign_draws =
        static_cast<int>(ini_long(file, "scenario.assign_draws", base.n_assign_draws));
    base.target_cohens_d = ini_double(file, "scenario.cohens_d", base.target_cohens_d);
    base.noise_sd = ini_double(file, "scenario.noise_sd", base.noise_sd);
    base.seed = static_cast<std::uint64_t>(
        ini_long(file, "scenario.seed", static_cast<long>(base.seed)));
    base.restrict_x1 = ini_double(file, "scenario.restrict_x1", base.restrict_x1);
    base.restrict_x5 = ini_double(file, "scenario.restrict_x5", base.restrict_x5);
    {
        std::string v = file.get_or("scenario.enrollment", "random");
        if (v == "random") base.enrollment = enrollment_kind::random_sampling;
        else if (v == "restricted") base.enrollment = enrollment_kind::restricted;
        else throw std::invalid_argument("scenario.enrollment must be random or restricted");
    }
    {
        std::string v = file.get_or("scenario.sigma", "random");
        if (v == "random") base.sigma = sigma_mode::random_draw;
        else if (v == "identity") base.sigma = sigma_mode::identity;
        else throw std::invalid_argument("scenario.sigma must be random or identity");
    }
    if (file.has("scenario.beta")) {
        base.beta = ini_double_list(file, "scenario.beta");
        if (base.beta.size() != static_cast<std::size_t>(base.d))
            throw std::invalid_argument("scenario.beta must have one entry per covariate");
    } else {
        base.beta.assign(static_cast<std::size_t>(base.d), 1.0);
    }

    std::string effects = file.get_or("scenario.effects",
                                      "constant,linear_bin,quadratic_bin");
    for (const std::string& tok : split_csv_list(effects)) {
        auto shape = effect_shape_from_string(tok);
        if (!shape) throw std::invalid_argument("unknown effect shape: " + tok);
        grid.effects.push_back(*shape);
    }
    std::string gammas = file.get_or("scenario.gammas", "corr3,corr6,orth3,orth6");
    for (const std::string& tok : split_csv_list(gammas)) {
        if (tok == "custom") {
            if (!file.has("scenario.gamma"))
                throw std::invalid_argument(
                    "gamma entry 'custom' needs a scenario.gamma coefficient list");
        } else {
            named_gamma(tok);  // validates the name
        }
        grid.gammas.push_back(tok);
    }
    if (file.has("scenario.gamma")) {
        grid.base.gamma = ini_double_list(file, "scenario.gamma");
        if (grid.base.gamma.size() != static_cast<std::size_t>(grid.base.d))
            throw std::invalid_argument("scenario.gamma must have one entry per covariate");
    }
    if (grid.effects.empty() || grid.gammas.empty())
        throw std::invalid_argument("scenario grid needs at least one effect and one gamma");
    return grid;
}

scenario_spec row_spec(const scenario_grid& grid, effect_shape shape,
                       const std::string& gamma_name) {
    scenario_spec spec = grid.base;
    spec.shape = shape;
    spec.gamma_name = gamma_name;
    if (gamma_name == "custom") {
        if (spec.gamma.empty())
            throw std::invalid_argument("gamma entry 'custom' needs a base gamma vector");
    } else {
        spec.gamma = named_gamma(gamma_name);
        if (spec.gamma.size() != static_cast<std::size_t>(spec.d))
            throw std::invalid_argument("named gamma vectors require d = 5");
    }
    return spec;
}

}  // namespace spikestrat
