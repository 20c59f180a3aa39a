#include "spikestrat/logistic.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace spikestrat {

namespace {

constexpr double separation_threshold = 15.0;
constexpr double ridge_penalty = 1e-6;
constexpr double weight_floor = 1e-10;

double sigmoid(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
    double dev = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double m = std::min(std::max(mu(i), 1e-12), 1.0 - 1e-12);
        dev += y(i) > 0.5 ? std::log(m) : std::log(1.0 - m);
    }
    return -2.0 * dev;
}

}  // namespace

logistic_model fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const std::vector<int>& features) {
    Eigen::Index n = x.rows();
    if (y.size() != n) throw std::invalid_argument("labels and covariates differ in length");
    if (n == 0) throw std::invalid_argument("cannot fit on an empty dataset");
    long positives = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y(i) != 0.0 && y(i) != 1.0)
            throw std::invalid_argument("labels must be exactly 0 or 1");
        if (y(i) == 1.0) ++positives;
    }
    if (positives == 0 || positives == n)
        throw std::invalid_argument("labels are single-class; a logistic fit needs both");

    Eigen::Index p = static_cast<Eigen::Index>(features.size());
    Eigen::MatrixXd design(n, p + 1);
    design.col(0).setOnes();
    for (Eigen::Index j = 0; j < p; ++j) {
        int col = features[static_cast<std::size_t>(j)];
        if (col < 0 || col >= x.cols())
            throw std::invalid_argument("feature column index out of range");
        design.col(j + 1) = x.col(col);
    }
    if (!design.allFinite()) throw std::invalid_argument("covariates must be finite");

    logistic_model model;
    model.features = features;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
    Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, 0.5);
    double dev = binomial_deviance(y, mu);
    Eigen::MatrixXd normal;  // weighted normal matrix at the last solve

    for (int it = 1; it <= 100; ++it) {
        model.iterations = it;
        Eigen::VectorXd eta = design * beta;
        for (Eigen::Index i = 0; i < n; ++i) mu(i) = sigmoid(eta(i));
        Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).max(weight_floor).matrix();
        Eigen::VectorXd z = eta + ((y - mu).array() / w.array()).matrix();
        normal = design.transpose() * w.asDiagonal() * design;
        if (model.separated)
            normal.diagonal().array() += ridge_penalty;
        Eigen::VectorXd rhs = design.transpose() * (w.array() * z.array()).matrix();
        Eigen::LDLT<Eigen::MatrixXd> solver(normal);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("weighted normal equations are not factorizable");
        beta = solver.solve(rhs);
        if (!model.separated && beta.cwiseAbs().maxCoeff() > separation_threshold)
            model.separated = true;

        eta = design * beta;
        for (Eigen::Index i = 0; i < n; ++i) mu(i) = sigmoid(eta(i));
        double dev_new = binomial_deviance(y, mu);
        bool done = std::abs(dev_new - dev) < 1e-8 * (std::abs(dev) + 0.1);
        dev = dev_new;
        if (done) {
            model.converged = true;
            break;
        }
    }

    model.intercept = beta(0);
    model.coefficients.resize(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j)
        model.coefficients[static_cast<std::size_t>(j)] = beta(j + 1);
    model.deviance = dev;
    model.aic = dev + 2.0 * static_cast<double>(p + 1);

    Eigen::MatrixXd cov = Eigen::LDLT<Eigen::MatrixXd>(normal).solve(
        Eigen::MatrixXd::Identity(p + 1, p + 1));
    model.se.resize(static_cast<std::size_t>(p + 1));
    for (Eigen::Index j = 0; j <= p; ++j)
        model.se[static_cast<std::size_t>(j)] = std::sqrt(std::max(cov(j, j), 0.0));
    return model;
}

logistic_model fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    std::vector<int> features(static_cast<std::size_t>(x.cols()));
    for (std::size_t j = 0; j < features.size(); ++j) features[j] = static_cast<int>(j);
    return fit_logistic(x, y, features);
}

double predict_probability(const logistic_model& model, const std::vector<double>& x) {
    double eta = model.intercept;
    for (std::size_t j = 0; j < model.features.size(); ++j) {
        std::size_t col = static_cast<std::size_t>(model.features[j]);
        if (col >= x.size())
            throw std::invalid_argument("model feature outside the covariate vector");
        eta += model.coefficients[j] * x[col];
    }
    return sigmoid(eta);
}

dataset score_dataset(const logistic_model& model, const dataset& data,
                      score_target target, double clip_lo, double clip_hi) {
    if (!(clip_lo > 0 && clip_hi < 1 && clip_lo < clip_hi))
        throw std::invalid_argument("clip bounds must satisfy 0 < lo < hi < 1");
    for (int f : model.features)
        if (f < 0 || f >= data.dims())
            throw std::invalid_argument("model feature outside the dataset's columns");
    std::vector<subject> subjects = data.subjects();
    for (subject& s : subjects) {
        double prob = predict_probability(model, s.x);
        if (target == score_target::propensity)
            s.e = std::min(std::max(prob, clip_lo), clip_hi);
        else
            s.prog = prob;
    }
    return dataset(std::move(subjects), data.dims(), data.metadata());
}

std::string model_to_json(const logistic_model& model) {
    nlohmann::ordered_json root;
    root["intercept"] = model.intercept;
    nlohmann::ordered_json coef = nlohmann::ordered_json::object();
    nlohmann::ordered_json order = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < model.features.size(); ++j) {
        std::string name = "x" + std::to_string(model.features[j] + 1);
        coef[name] = model.coefficients[j];
        order.push_back(name);
    }
    root["coefficients"] = std::move(coef);
    root["selected_order"] = std::move(order);
    root["meta"] = {{"iterations", model.iterations}, {"deviance", model.deviance},
                    {"aic", model.aic},               {"converged", model.converged},
                    {"separated", model.separated},   {"se", model.se}};
    return root.dump(2) + "\n";
}

logistic_model model_from_json(const std::string& text) {
    nlohmann::json root = nlohmann::json::parse(text);
    logistic_model model;
    model.intercept = root.at("intercept").get<double>();
    for (const auto& name : root.at("selected_order")) {
        std::string key = name.get<std::string>();
        if (key.size() < 2 || key[0] != 'x')
            throw std::invalid_argument("unrecognized feature name in model: " + key);
        model.features.push_back(std::stoi(key.substr(1)) - 1);
        model.coefficients.push_back(root.at("coefficients").at(key).get<double>());
    }
    if (root.contains("meta")) {
        const auto& meta = root["meta"];
        model.iterations = meta.value("iterations", 0);
        model.deviance = meta.value("deviance", 0.0);
        model.aic = meta.value("aic", 0.0);
        model.converged = meta.value("converged", false);
        model.separated = meta.value("separated", false);
        if (meta.contains("se")) model.se = meta["se"].get<std::vector<double>>();
    }
    return model;
}

}  // namespace spikestrat
