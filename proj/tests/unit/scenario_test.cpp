#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

#include "spikestrat/ini.hpp"
#include "spikestrat/moments.hpp"
#include "spikestrat/rng.hpp"
#include "spikestrat/scenario.hpp"
#include "spikestrat/strata.hpp"

using namespace spikestrat;

namespace {

scenario_spec small_spec() {
    scenario_spec spec;
    spec.n_o = 300;
    spec.n_r = 50;
    spec.d = 5;
    spec.gamma = named_gamma("corr3");
    spec.gamma_name = "corr3";
    spec.beta.assign(5, 1.0);
    spec.sigma = sigma_mode::identity;
    spec.seed = 7;
    return spec;
}

}  // namespace

TEST_CASE("named propensity coefficient vectors") {
    const double r2 = std::sqrt(2.0);
    const double h3 = std::sqrt(3.0) / 2.0;
    const double h6 = std::sqrt(6.0) / 2.0;
    CHECK(named_gamma("corr3") == std::vector<double>{1, 1, 1, 0, 0});
    CHECK(named_gamma("corr6") == std::vector<double>{r2, r2, r2, 0, 0});
    CHECK(named_gamma("orth3") == std::vector<double>{h3, -h3, h3, -h3, 0});
    CHECK(named_gamma("orth6") == std::vector<double>{h6, -h6, h6, -h6, 0});

    // Squared norms and alignment with the all-ones outcome coefficients.
    for (const char* name : {"corr3", "corr6", "orth3", "orth6"}) {
        std::vector<double> g = named_gamma(name);
        double norm2 = 0.0, dot_ones = 0.0;
        for (double v : g) {
            norm2 += v * v;
            dot_ones += v;
        }
        CHECK(norm2 == doctest::Approx(gamma_norm2(name)).epsilon(1e-12));
        if (gamma_correlated(name))
            CHECK(dot_ones > 0.0);
        else
            CHECK(dot_ones == doctest::Approx(0.0).epsilon(1e-12));
    }
    CHECK(gamma_norm2("corr3") == 3);
    CHECK(gamma_norm2("orth6") == 6);
    CHECK(gamma_correlated("corr6"));
    CHECK_FALSE(gamma_correlated("orth3"));
    CHECK_THROWS_AS(named_gamma("corr9"), std::invalid_argument);
    CHECK_THROWS_AS(gamma_correlated("x"), std::invalid_argument);
    CHECK_THROWS_AS(gamma_norm2("x"), std::invalid_argument);
}

TEST_CASE("effect shape names round-trip") {
    for (effect_shape s : {effect_shape::constant, effect_shape::linear_bin,
                           effect_shape::quadratic_bin, effect_shape::linear_propensity,
                           effect_shape::quadratic_propensity}) {
        auto back = effect_shape_from_string(to_string(s));
        REQUIRE(back.has_value());
        CHECK(*back == s);
    }
    CHECK_FALSE(effect_shape_from_string("cubic").has_value());
}

TEST_CASE("random correlation matrices have the documented entry law") {
    rng_stream rng(11, "sigma_law");
    std::map<double, long> freq;
    long total = 0;
    for (int rep = 0; rep < 2000; ++rep) {
        Eigen::MatrixXd m = sample_covariance(4, rng);
        REQUIRE(m.rows() == 4);
        REQUIRE(m.cols() == 4);
        for (int i = 0; i < 4; ++i) {
            CHECK(m(i, i) == 1.0);
            for (int j = i + 1; j < 4; ++j) {
                CHECK(m(i, j) == m(j, i));
                bool allowed = m(i, j) == 0.0 || m(i, j) == 0.1 || m(i, j) == -0.1;
                CHECK(allowed);
                ++freq[m(i, j)];
                ++total;
            }
        }
    }
    double p0 = static_cast<double>(freq[0.0]) / static_cast<double>(total);
    double pp = static_cast<double>(freq[0.1]) / static_cast<double>(total);
    double pm = static_cast<double>(freq[-0.1]) / static_cast<double>(total);
    CHECK(std::abs(p0 - 0.5) < 0.02);
    CHECK(std::abs(pp - 0.25) < 0.02);
    CHECK(std::abs(pm - 0.25) < 0.02);
    CHECK_THROWS_AS(sample_covariance(0, rng), std::invalid_argument);
}

TEST_CASE("effect scaling hits the target standardized difference") {
    std::vector<double> y_c = {0, 1, 2, 3, 4};  // sample variance 2.5

    SUBCASE("constant pattern has the closed form") {
        std::vector<double> ones(5, 1.0);
        double t = cohens_d_scale(y_c, ones, 0.5);
        CHECK(t == doctest::Approx(0.5 * std::sqrt(2.5)).epsilon(1e-12));
        // Doubling the pattern halves the scale.
        std::vector<double> twos(5, 2.0);
        CHECK(cohens_d_scale(y_c, twos, 0.5) == doctest::Approx(t / 2.0).epsilon(1e-12));
        CHECK(cohens_d_scale(y_c, ones, 0.0) == 0.0);
    }

    SUBCASE("bisection reproduces the target on a varying pattern") {
        rng_stream rng(12, "dscale");
        std::vector<double> yc(60), g(60);
        for (std::size_t i = 0; i < 60; ++i) {
            yc[i] = rng.normal(0.0, 2.0);
            g[i] = 0.1 + rng.uniform01();  // positive mean, non-constant
        }
        double t = cohens_d_scale(yc, g, 0.5);
        std::vector<double> yt(60);
        for (std::size_t i = 0; i < 60; ++i) yt[i] = yc[i] + t * g[i];
        CHECK(cohens_d_of(yt, yc) == doctest::Approx(0.5).epsilon(1e-8));
    }

    SUBCASE("validation") {
        std::vector<double> ones(5, 1.0);
        std::vector<double> neg(5, -1.0);
        std::vector<double> short_g(3, 1.0);
        std::vector<double> one(1, 1.0), one_y(1, 0.0);
        CHECK_THROWS_AS(cohens_d_scale(y_c, neg, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(cohens_d_scale(y_c, short_g, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(cohens_d_scale(one_y, one, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(cohens_d_scale(y_c, ones, -0.1), std::invalid_argument);
    }
}

TEST_CASE("standardized difference of stored potential outcomes") {
    std::vector<double> y_c = {0, 2};
    std::vector<double> y_t = {1, 3};
    CHECK(cohens_d_of(y_t, y_c) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    std::vector<double> shorter = {1.0};
    CHECK_THROWS_AS(cohens_d_of(shorter, y_c), std::invalid_argument);
    CHECK_THROWS_AS(cohens_d_of(shorter, shorter), std::invalid_argument);
}

TEST_CASE("covariate draws carry consistent propensities, outcomes, and scale") {
    scenario_spec spec = small_spec();
    covariate_realization cov = draw_covariates(spec, 0);

    REQUIRE(cov.odb.x.rows() == 300);
    REQUIRE(cov.odb.x.cols() == 5);
    REQUIRE(cov.odb.e.size() == 300);
    REQUIRE(cov.odb.y_c.size() == 300);
    REQUIRE(cov.odb.y_t.size() == 300);
    REQUIRE(cov.odb.pattern.size() == 300);
    REQUIRE(cov.rct.e.size() == 50);

    for (std::size_t i = 0; i < 300; ++i) {
        double eta = 0.0;
        for (int j = 0; j < 5; ++j)
            eta += spec.gamma[static_cast<std::size_t>(j)] *
                   cov.odb.x(static_cast<Eigen::Index>(i), j);
        CHECK(cov.odb.e[i] ==
              doctest::Approx(1.0 / (1.0 + std::exp(-eta))).epsilon(1e-12));
        CHECK(cov.odb.pattern[i] == 1.0);  // constant shape
        CHECK(cov.odb.y_t[i] == cov.odb.y_c[i] + cov.t_scale);
    }

    // Constant pattern: scale is target * sd(y_c), truth is the scale itself.
    CHECK(cov.t_scale ==
          doctest::Approx(0.5 * std::sqrt(sample_variance(cov.odb.y_c))).epsilon(1e-12));
    CHECK(cov.true_tau == doctest::Approx(cov.t_scale).epsilon(1e-12));
    CHECK(cohens_d_of(cov.odb.y_t, cov.odb.y_c) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK((cov.sigma - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() == 0.0);

    // Same draw index reproduces the realization; another index moves it.
    covariate_realization again = draw_covariates(spec, 0);
    CHECK((again.odb.x - cov.odb.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(again.rct.y_c == cov.rct.y_c);
    CHECK(again.t_scale == cov.t_scale);
    covariate_realization other = draw_covariates(spec, 1);
    CHECK(other.odb.x(0, 0) != cov.odb.x(0, 0));
}

TEST_CASE("effect patterns follow the declared shape") {
    scenario_spec spec = small_spec();
    spec.n_o = 80;
    spec.n_r = 10;

    spec.shape = effect_shape::linear_propensity;
    covariate_realization lin = draw_covariates(spec, 0);
    for (std::size_t i = 0; i < 80; ++i) CHECK(lin.odb.pattern[i] == lin.odb.e[i]);

    spec.shape = effect_shape::quadratic_propensity;
    covariate_realization quad = draw_covariates(spec, 0);
    for (std::size_t i = 0; i < 80; ++i) {
        double c = quad.odb.e[i] - 0.5;
        CHECK(quad.odb.pattern[i] == c * c);
    }

    spec.shape = effect_shape::linear_bin;
    covariate_realization linb = draw_covariates(spec, 0);
    for (std::size_t i = 0; i < 80; ++i) {
        double want = static_cast<double>(bin_of_score(linb.odb.e[i], spec.k)) /
                      static_cast<double>(spec.k);
        CHECK(linb.odb.pattern[i] == want);
    }

    spec.shape = effect_shape::quadratic_bin;
    covariate_realization quadb = draw_covariates(spec, 0);
    for (std::size_t i = 0; i < 80; ++i) {
        double frac = static_cast<double>(bin_of_score(quadb.odb.e[i], spec.k)) /
                      static_cast<double>(spec.k);
        CHECK(quadb.odb.pattern[i] == (frac - 0.5) * (frac - 0.5));
    }
}

TEST_CASE("restricted enrollment truncates the trial covariates only") {
    scenario_spec spec = small_spec();
    spec.n_o = 100;
    spec.n_r = 40;
    spec.enrollment = enrollment_kind::restricted;
    covariate_realization cov = draw_covariates(spec, 0);

    for (long i = 0; i < 40; ++i) {
        CHECK(cov.rct.x(i, 0) < -1.0);
        CHECK(cov.rct.x(i, 4) < -1.0);
    }
    CHECK(cov.rejection_attempts >= 40);

    bool odb_unrestricted = false;
    for (long i = 0; i < 100; ++i)
        if (cov.odb.x(i, 0) >= -1.0) odb_unrestricted = true;
    CHECK(odb_unrestricted);
}

TEST_CASE("treatment assignment packages a full dataset") {
    scenario_spec spec = small_spec();
    covariate_realization cov = draw_covariates(spec, 0);
    dataset data = assign_treatments(spec, cov, 0);

    CHECK(data.n_odb() == 300);
    CHECK(data.n_rct() == 50);
    CHECK(data.dims() == 5);
    CHECK(data.all_have_propensity());
    CHECK(data.all_have_potential_outcomes());
    CHECK(data.subjects()[0].id == "o1");
    CHECK(data.subjects()[300].id == "r1");

    for (std::size_t i = 0; i < 300; ++i) {
        const subject& s = data.subjects()[i];
        CHECK(*s.e == cov.odb.e[i]);
        CHECK(*s.y_t == cov.odb.y_t[i]);
        CHECK(*s.y_c == cov.odb.y_c[i]);
        CHECK(s.y == (s.w == 1 ? cov.odb.y_t[i] : cov.odb.y_c[i]));
    }

    dataset again = assign_treatments(spec, cov, 0);
    bool same = true, differs = false;
    dataset other = assign_treatments(spec, cov, 1);
    for (std::size_t i = 0; i < data.subjects().size(); ++i) {
        same = same && again.subjects()[i].w == data.subjects()[i].w;
        differs = differs || other.subjects()[i].w != data.subjects()[i].w;
    }
    CHECK(same);
    CHECK(differs);

    dataset one_call = generate_scenario(spec);
    CHECK(one_call.subjects()[0].w == data.subjects()[0].w);
    CHECK(one_call.subjects()[0].y == data.subjects()[0].y);
    CHECK(one_call.subjects()[349].w == data.subjects()[349].w);
}

TEST_CASE("oracle truth bins by true propensity and uses population formulas") {
    scenario_spec spec = small_spec();
    spec.k = 10;
    covariate_realization cov = draw_covariates(spec, 0);
    oracle_inputs truth = oracle_truth(spec, cov);
    REQUIRE(truth.mse_odb.size() == 10);
    REQUIRE(truth.var_rct.size() == 10);

    std::vector<std::vector<std::size_t>> ob(10), rb(10);
    for (std::size_t i = 0; i < cov.odb.e.size(); ++i)
        ob[static_cast<std::size_t>(bin_of_score(cov.odb.e[i], 10) - 1)].push_back(i);
    for (std::size_t i = 0; i < cov.rct.e.size(); ++i)
        rb[static_cast<std::size_t>(bin_of_score(cov.rct.e[i], 10) - 1)].push_back(i);

    for (std::size_t b = 0; b < 10; ++b) {
        CHECK(truth.mse_odb[b].has_value() == !ob[b].empty());
        CHECK(truth.var_rct[b].has_value() == !rb[b].empty());
        if (!ob[b].empty()) {
            std::vector<double> p, yt, yc;
            for (std::size_t i : ob[b]) {
                p.push_back(cov.odb.e[i]);
                yt.push_back(cov.odb.y_t[i]);
                yc.push_back(cov.odb.y_c[i]);
            }
            CHECK(*truth.mse_odb[b] ==
                  doctest::Approx(delta_tau_moments(population_moments(p, yt, yc)).mse)
                      .epsilon(1e-12));
        }
        if (!rb[b].empty()) {
            std::vector<double> yt, yc;
            for (std::size_t i : rb[b]) {
                yt.push_back(cov.rct.y_t[i]);
                yc.push_back(cov.rct.y_c[i]);
            }
            CHECK(*truth.var_rct[b] ==
                  doctest::Approx(rct_population_variance(yt, yc, spec.p_r))
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("scenario validation rejects bad fields") {
    scenario_spec ok = small_spec();
    CHECK_NOTHROW(ok.validate());

    scenario_spec s = ok;
    s.n_o = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.d = 4;  // gamma/beta still size 5
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.gamma.pop_back();
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.beta.push_back(1.0);
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.p_r = 1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.k = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.n_cov_draws = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.target_cohens_d = -0.5;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.noise_sd = -1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.noise_sd = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.sigma = sigma_mode::custom;
    s.sigma_custom.assign(24, 0.0);
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.gamma[2] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("zero outcome noise is accepted and exact") {
    scenario_spec spec = small_spec();
    spec.n_o = 50;
    spec.n_r = 10;
    spec.noise_sd = 0.0;
    covariate_realization cov = draw_covariates(spec, 0);
    // With beta = ones and no noise the control outcome is the coordinate sum.
    for (std::size_t i = 0; i < 50; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 5; ++j) sum += cov.odb.x(static_cast<Eigen::Index>(i), j);
        CHECK(cov.odb.y_c[i] == doctest::Approx(sum).epsilon(1e-12));
    }
}

TEST_CASE("grid parsing from config text") {
    const std::string text =
        "[scenario]\n"
        "n_o = 400\n"
        "n_r = 60\n"
        "seed = 9\n"
        "noise_sd = 0.5\n"
        "enrollment = restricted\n"
        "sigma = identity\n"
        "effects = constant, linear_bin\n"
        "gammas = corr3, custom\n"
        "gamma = 1, 0, 0, 0, 0.5\n";
    scenario_grid grid = grid_from_ini(parse_ini_text(text, "test"));

    CHECK(grid.base.n_o == 400);
    CHECK(grid.base.n_r == 60);
    CHECK(grid.base.seed == 9);
    CHECK(grid.base.noise_sd == 0.5);
    CHECK(grid.base.enrollment == enrollment_kind::restricted);
    CHECK(grid.base.sigma == sigma_mode::identity);
    CHECK(grid.base.beta == std::vector<double>(5, 1.0));
    CHECK(grid.base.gamma == std::vector<double>{1, 0, 0, 0, 0.5});
    REQUIRE(grid.effects.size() == 2);
    CHECK(grid.effects[0] == effect_shape::constant);
    CHECK(grid.effects[1] == effect_shape::linear_bin);
    CHECK(grid.gammas == std::vector<std::string>{"corr3", "custom"});

    scenario_spec named = row_spec(grid, effect_shape::constant, "corr3");
    CHECK(named.gamma == named_gamma("corr3"));
    CHECK(named.gamma_name == "corr3");
    CHECK(named.shape == effect_shape::constant);
    scenario_spec custom = row_spec(grid, effect_shape::linear_bin, "custom");
    CHECK(custom.gamma == std::vector<double>{1, 0, 0, 0, 0.5});
    CHECK_NOTHROW(named.validate());
    CHECK_NOTHROW(custom.validate());

    scenario_grid defaults = grid_from_ini(parse_ini_text("", "empty"));
    CHECK(defaults.base.n_o == 5000);
    CHECK(defaults.base.n_r == 200);
    CHECK(defaults.base.k == 20);
    CHECK(defaults.effects.size() == 3);
    CHECK(defaults.gammas ==
          std::vector<std::string>{"corr3", "corr6", "orth3", "orth6"});

    CHECK_THROWS_AS(grid_from_ini(parse_ini_text("[scenario]\ngammas = custom\n", "t")),
                    std::invalid_argument);
    CHECK_THROWS_AS(grid_from_ini(parse_ini_text("[scenario]\neffects = cubic\n", "t")),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        grid_from_ini(parse_ini_text("[scenario]\nenrollment = open\n", "t")),
        std::invalid_argument);
    CHECK_THROWS_AS(grid_from_ini(parse_ini_text("[scenario]\neffects =\n", "t")),
                    std::invalid_argument);
    CHECK_THROWS_AS(grid_from_ini(parse_ini_text("[scenario]\ngammas = corr9\n", "t")),
                    std::invalid_argument);
}
