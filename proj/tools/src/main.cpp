// Command-line front end: wires ingestion, model fitting, stratification,
// estimation, simulation, and bootstrap into reproducible runs. Every output
// directory receives a manifest with the resolved configuration and sha256
// hashes of the artifacts, and all randomness flows from the run seed.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spikestrat/balance.hpp"
#include "spikestrat/bootstrap.hpp"
#include "spikestrat/csv.hpp"
#include "spikestrat/dataset.hpp"
#include "spikestrat/estimators.hpp"
#include "spikestrat/ini.hpp"
#include "spikestrat/logistic.hpp"
#include "spikestrat/mse.hpp"
#include "spikestrat/scenario.hpp"
#include "spikestrat/sha256.hpp"
#include "spikestrat/stepwise.hpp"
#include "spikestrat/strata.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace spikestrat;

namespace {

// Bad inputs exit 1; failures while computing exit 2.
struct validation_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("short write to " + path.string());
}

std::vector<method> parse_methods(const std::string& list) {
    std::vector<method> out;
    for (const std::string& name : split_csv_list(list)) {
        auto m = method_from_string(name);
        if (!m) throw validation_error("unknown method '" + name + "'");
        if (std::find(out.begin(), out.end(), *m) != out.end())
            throw validation_error("method '" + name + "' listed twice");
        out.push_back(*m);
    }
    if (out.empty()) throw validation_error("empty method list");
    return out;
}

aggregate_policy parse_policy(const std::string& name) {
    auto p = policy_from_string(name);
    if (!p)
        throw validation_error("unknown aggregation policy '" + name +
                               "' (expected strict, renormalize, or cross)");
    return *p;
}

std::string methods_string(const std::vector<method>& ms) {
    std::string out;
    for (method m : ms) {
        if (!out.empty()) out += ',';
        out += to_string(m);
    }
    return out;
}

// Manifest: command, resolved configuration, and a sha256 per artifact in
// the output directory. No timestamps, so reruns are byte-identical.
void write_manifest(const fs::path& dir, const std::string& command,
                    const ordered_json& config, std::vector<std::string> artifacts) {
    std::sort(artifacts.begin(), artifacts.end());
    ordered_json m;
    m["command"] = command;
    m["config"] = config;
    ordered_json hashes = ordered_json::object();
    for (const std::string& name : artifacts) hashes[name] = sha256_file_hex(dir / name);
    m["artifacts"] = hashes;
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// Config file support: flat key-value files with one section per subcommand
// ([estimate] k = 10 sets --k for estimate). Command-line flags win because a
// config entry is injected only when its flag is absent from argv. Keys that
// match no flag fail parsing, and sections for other subcommands are errors.

bool truthy(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw validation_error("config key " + key + " expects a boolean, got '" + v + "'");
}

std::vector<std::string> inject_config(const std::vector<std::string>& args,
                                       const std::string& subcommand,
                                       const std::string& config_path,
                                       const std::vector<std::string>& flag_names) {
    ini_file file = parse_ini(config_path);
    std::vector<std::string> out = args;
    for (const auto& [key, value] : file.entries) {
        auto dot = key.find('.');
        if (dot == std::string::npos)
            throw validation_error("config key '" + key +
                                   "' is outside any section; use [" + subcommand + "]");
        std::string section = key.substr(0, dot);
        std::string name = key.substr(dot + 1);
        if (section != subcommand)
            throw validation_error("config section [" + section +
                                   "] does not apply to subcommand '" + subcommand + "'");
        std::string flag = "--" + name;
        bool present = false;
        for (const std::string& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) present = true;
        if (present) continue;  // command line overrides config
        bool is_flag_only = std::find(flag_names.begin(), flag_names.end(), name) !=
                            flag_names.end();
        if (is_flag_only) {
            if (truthy(value, key)) out.push_back(flag);
        } else {
            out.push_back(flag);
            out.push_back(value);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces.

dataset load_dataset(const std::string& path) { return read_dataset(path); }

stratification_plan build_plan(const dataset& data, int k, long min_arm,
                               int prognostic_bins) {
    stratification_plan plan = make_equal_width_strata(data, k);
    if (min_arm > 0) plan = merge_sparse_strata(data, plan, min_arm);
    if (prognostic_bins > 0) plan = sub_stratify_prognostic(data, plan, prognostic_bins);
    return plan;
}

std::string covariate_name(int column) { return "x" + std::to_string(column + 1); }

std::string trace_to_csv(const auc_trace& trace) {
    std::ostringstream os;
    os << "size,covariate,aic,nominal_auc,cv_auc,chosen\n";
    for (const auc_trace_row& row : trace.rows)
        os << row.size << ',' << covariate_name(row.feature) << ','
           << format_double(row.aic) << ',' << format_double(row.nominal_auc) << ','
           << format_double(row.cv_auc) << ',' << (row.size == trace.chosen_size ? 1 : 0)
           << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Subcommand payloads. Each returns 0 and throws on failure.

struct simulate_args {
    std::string scenario, out, methods = "odb,rct,weighted,spiked,dynamic,oracle";
    std::string policy = "renormalize";
    std::uint64_t seed = 0;
    int threads = 0;
    int cov_draws = 0, assign_draws = 0;  // 0 keeps the scenario file's values
    double max_excluded = 0.01;
    bool keep_draws = false;
};

int cmd_simulate(const simulate_args& a) {
    scenario_grid grid = grid_from_ini(parse_ini(a.scenario));
    grid.base.seed = a.seed;
    if (a.cov_draws > 0) grid.base.n_cov_draws = a.cov_draws;
    if (a.assign_draws > 0) grid.base.n_assign_draws = a.assign_draws;

    mse_options options;
    options.methods = parse_methods(a.methods);
    options.policy = parse_policy(a.policy);
    options.threads = a.threads;
    options.keep_draws = a.keep_draws;
    options.max_excluded_fraction = a.max_excluded;

    mse_table table = run_mse_experiment(grid, options);

    fs::path dir = prepare_out_dir(a.out);
    write_text(dir / "mse.csv", mse_table_to_csv(table));
    write_text(dir / "mse.json", mse_table_to_json(table));
    write_text(dir / "mse.txt", mse_table_to_text(table));
    std::vector<std::string> artifacts = {"mse.csv", "mse.json", "mse.txt"};
    if (a.keep_draws) {
        write_text(dir / "draws.csv", draws_to_csv(table));
        artifacts.push_back("draws.csv");
    }

    ordered_json cfg;
    cfg["scenario_file"] = a.scenario;
    cfg["seed"] = a.seed;
    cfg["threads"] = a.threads;
    cfg["methods"] = methods_string(options.methods);
    cfg["policy"] = to_string(options.policy);
    cfg["keep_draws"] = a.keep_draws;
    cfg["max_excluded"] = a.max_excluded;
    ordered_json sc;  // resolved grid, sufficient to reproduce without the file
    const scenario_spec& b = grid.base;
    sc["n_o"] = b.n_o;
    sc["n_r"] = b.n_r;
    sc["d"] = b.d;
    sc["p_r"] = b.p_r;
    sc["k"] = b.k;
    sc["cov_draws"] = b.n_cov_draws;
    sc["assign_draws"] = b.n_assign_draws;
    sc["cohens_d"] = b.target_cohens_d;
    sc["enrollment"] =
        b.enrollment == enrollment_kind::restricted ? "restricted" : "random";
    sc["restrict_x1"] = b.restrict_x1;
    sc["restrict_x5"] = b.restrict_x5;
    sc["sigma"] = b.sigma == sigma_mode::identity ? "identity" : "random";
    sc["beta"] = b.beta;
    ordered_json effects = ordered_json::array();
    for (effect_shape s : grid.effects) effects.push_back(to_string(s));
    sc["effects"] = effects;
    sc["gammas"] = grid.gammas;
    cfg["scenario"] = sc;
    write_manifest(dir, "simulate", cfg, artifacts);

    std::cout << mse_table_to_text(table);
    std::cout << "wrote " << (dir / "mse.csv").string() << " (+json, txt)\n";
    return 0;
}

struct fit_args {
    std::string data, out, scored_out;
    int max_vars = 120;
    int folds = 10;
    double stop_bp = 1.0;
    std::uint64_t seed = 0;
};

int cmd_fit(const fit_args& a, score_target target) {
    const bool propensity = target == score_target::propensity;
    const char* what = propensity ? "propensity" : "prognostic";
    dataset data = load_dataset(a.data);
    if (data.n_odb() == 0)
        throw validation_error(std::string(what) + " fit needs database subjects");

    // Propensity: treatment indicator over all database rows. Prognostic:
    // binary outcome over database control rows only.
    auto pred = [propensity](const subject& s) {
        return s.source == source_kind::odb && (propensity || s.w == 0);
    };
    auto [x, y] = design_from(data, pred, propensity);
    if (x.rows() == 0)
        throw validation_error(std::string(what) + " fit has no eligible rows");
    if (!propensity)
        for (Eigen::Index i = 0; i < y.size(); ++i)
            if (y(i) != 0.0 && y(i) != 1.0)
                throw validation_error(
                    "prognostic fit needs a binary outcome; found y=" +
                    format_double(y(i)));

    std::vector<int> candidates(static_cast<std::size_t>(data.dims()));
    for (int j = 0; j < data.dims(); ++j) candidates[static_cast<std::size_t>(j)] = j;
    int max_vars = std::min(a.max_vars, data.dims());
    if (max_vars < 1) throw validation_error("--max-vars must be at least 1");
    if (a.folds < 2) throw validation_error("--folds must be at least 2");
    double min_gain = a.stop_bp * 1e-4;

    rng_stream fold_rng = rng_stream(a.seed, propensity ? "propensity_folds"
                                                        : "prognostic_folds");
    auc_trace trace = stepwise_with_cv(x, y, candidates, max_vars, a.folds, min_gain,
                                       fold_rng);
    std::vector<int> chosen;
    for (const auc_trace_row& row : trace.rows)
        if (row.size <= trace.chosen_size) chosen.push_back(row.feature);
    logistic_model model = fit_logistic(x, y, chosen);

    fs::path dir = prepare_out_dir(a.out);
    std::string model_name = std::string(what) + "_model.json";
    std::string trace_name = std::string(what) + "_trace.csv";
    write_text(dir / model_name, model_to_json(model));
    write_text(dir / trace_name, trace_to_csv(trace));
    std::vector<std::string> artifacts = {model_name, trace_name};

    if (!a.scored_out.empty()) {
        dataset scored = score_dataset(model, data, target);
        write_dataset(scored, a.scored_out);
        fs::path scored_path(a.scored_out);
        if (scored_path.has_parent_path() &&
            fs::weakly_canonical(scored_path.parent_path()) == fs::weakly_canonical(dir))
            artifacts.push_back(scored_path.filename().string());
    }

    ordered_json cfg;
    cfg["data"] = a.data;
    cfg["target"] = what;
    cfg["max_vars"] = max_vars;
    cfg["folds"] = a.folds;
    cfg["stop_bp"] = a.stop_bp;
    cfg["seed"] = a.seed;
    cfg["scored_out"] = a.scored_out;
    write_manifest(dir, propensity ? "fit-propensity" : "fit-prognostic", cfg, artifacts);

    std::cout << what << " model: " << chosen.size() << " covariate(s)";
    for (int j : chosen) std::cout << ' ' << covariate_name(j);
    std::cout << '\n';
    if (trace.chosen_size > 0) {
        const auc_trace_row& last =
            trace.rows[static_cast<std::size_t>(trace.chosen_size - 1)];
        std::cout << "cv auc " << format_double(last.cv_auc) << ", ";
    }
    std::cout << "aic " << format_double(model.aic) << ", converged "
              << (model.converged ? "yes" : "no") << '\n';
    std::cout << "wrote " << (dir / model_name).string() << '\n';
    return 0;
}

struct stratify_args {
    std::string data, out;
    int k = 10;
    long min_arm = 1;
    int prognostic_bins = 0;
};

ordered_json plan_to_json(const stratification_plan& plan) {
    ordered_json j;
    j["k_requested"] = plan.k_requested;
    j["composite"] = plan.composite;
    j["n_strata"] = plan.strata.size();
    ordered_json strata = ordered_json::array();
    for (std::size_t s = 0; s < plan.strata.size(); ++s) {
        const stratum_info& info = plan.strata[s];
        ordered_json row;
        row["stratum"] = s + 1;
        row["e_lo"] = info.e_lo;
        row["e_hi"] = info.e_hi;
        row["merged_from"] = info.merged_from;
        if (plan.composite) {
            if (info.parent >= 0) row["parent"] = info.parent + 1;
            if (std::isfinite(info.prog_lo)) row["prog_lo"] = info.prog_lo;
            if (std::isfinite(info.prog_hi)) row["prog_hi"] = info.prog_hi;
        }
        row["n_odb"] = info.n_odb;
        row["n_odb_t"] = info.n_odb_t;
        row["n_odb_c"] = info.n_odb_c;
        row["n_rct"] = info.n_rct;
        row["n_rct_t"] = info.n_rct_t;
        row["n_rct_c"] = info.n_rct_c;
        row["weight"] = info.weight;
        strata.push_back(row);
    }
    j["strata"] = strata;
    ordered_json assignment = ordered_json::array();
    for (int s : plan.assignment) assignment.push_back(s + 1);
    j["assignment"] = assignment;
    return j;
}

std::string plan_to_csv(const stratification_plan& plan) {
    std::ostringstream os;
    os << "stratum,e_lo,e_hi,merged_from,parent,prog_lo,prog_hi,"
          "n_odb,n_odb_t,n_odb_c,n_rct,n_rct_t,n_rct_c,weight\n";
    for (std::size_t s = 0; s < plan.strata.size(); ++s) {
        const stratum_info& info = plan.strata[s];
        os << (s + 1) << ',' << format_double(info.e_lo) << ','
           << format_double(info.e_hi) << ',';
        for (std::size_t i = 0; i < info.merged_from.size(); ++i)
            os << (i ? ";" : "") << info.merged_from[i];
        os << ',';
        if (plan.composite && info.parent >= 0) os << (info.parent + 1);
        os << ',';
        if (plan.composite && std::isfinite(info.prog_lo))
            os << format_double(info.prog_lo);
        os << ',';
        if (plan.composite && std::isfinite(info.prog_hi))
            os << format_double(info.prog_hi);
        os << ',' << info.n_odb << ',' << info.n_odb_t << ',' << info.n_odb_c << ','
           << info.n_rct << ',' << info.n_rct_t << ',' << info.n_rct_c << ','
           << format_double(info.weight) << '\n';
    }
    return os.str();
}

std::string plan_to_text(const stratification_plan& plan) {
    std::ostringstream os;
    os << (plan.composite ? "composite strata" : "propensity strata") << ": "
       << plan.strata.size() << " (requested k=" << plan.k_requested << ")\n";
    os << std::left << std::setw(8) << "stratum" << std::right << std::setw(9) << "e_lo"
       << std::setw(9) << "e_hi" << std::setw(8) << "n_odb" << std::setw(7) << "odb_t"
       << std::setw(7) << "odb_c" << std::setw(8) << "n_rct" << std::setw(7) << "rct_t"
       << std::setw(7) << "rct_c" << std::setw(9) << "weight" << '\n';
    for (std::size_t s = 0; s < plan.strata.size(); ++s) {
        const stratum_info& info = plan.strata[s];
        os << std::left << std::setw(8) << (s + 1) << std::right << std::fixed
           << std::setprecision(3) << std::setw(9) << info.e_lo << std::setw(9)
           << info.e_hi << std::setw(8) << info.n_odb << std::setw(7) << info.n_odb_t
           << std::setw(7) << info.n_odb_c << std::setw(8) << info.n_rct << std::setw(7)
           << info.n_rct_t << std::setw(7) << info.n_rct_c << std::setw(9)
           << std::setprecision(4) << info.weight << '\n';
    }
    return os.str();
}

void require_propensity(const dataset& data, const char* command) {
    if (!data.all_have_propensity())
        throw validation_error(
            std::string(command) +
            " needs propensity scores on every subject; run fit-propensity with "
            "--scored-out (or pass --propensity-model to estimate) first");
}

int cmd_stratify(const stratify_args& a) {
    dataset data = load_dataset(a.data);
    require_propensity(data, "stratify");
    if (a.prognostic_bins > 0 && !data.all_have_prognostic())
        throw validation_error(
            "stratify --prognostic-bins needs prognostic scores on every subject; "
            "run fit-prognostic with --scored-out first");
    stratification_plan plan = build_plan(data, a.k, a.min_arm, a.prognostic_bins);

    fs::path dir = prepare_out_dir(a.out);
    write_text(dir / "strata.json", plan_to_json(plan).dump(2) + "\n");
    write_text(dir / "strata.csv", plan_to_csv(plan));

    ordered_json cfg;
    cfg["data"] = a.data;
    cfg["k"] = a.k;
    cfg["min_arm"] = a.min_arm;
    cfg["prognostic_bins"] = a.prognostic_bins;
    write_manifest(dir, "stratify", cfg, {"strata.json", "strata.csv"});

    std::cout << plan_to_text(plan);
    std::cout << "wrote " << (dir / "strata.json").string() << " (+csv)\n";
    return 0;
}

struct balance_args {
    std::string data, out;
    int strata = 10;
    long min_arm = 1;
    int prognostic_bins = 0;
};

std::string balance_to_csv(const balance_report& report) {
    std::ostringstream os;
    os << "covariate,mean_t,mean_c,sd,sd_stratified\n";
    for (const balance_row& row : report.rows) {
        os << covariate_name(row.covariate - 1) << ',' << format_double(row.mean_t)
           << ',' << format_double(row.mean_c) << ','
           << format_double(row.sd_unstratified) << ',';
        if (row.sd_stratified) os << format_double(*row.sd_stratified);
        os << '\n';
    }
    return os.str();
}

ordered_json balance_to_json(const balance_report& report) {
    ordered_json j;
    j["common_weight"] = report.common_weight;
    ordered_json rows = ordered_json::array();
    for (const balance_row& row : report.rows) {
        ordered_json r;
        r["covariate"] = covariate_name(row.covariate - 1);
        r["mean_t"] = row.mean_t;
        r["mean_c"] = row.mean_c;
        r["sd"] = row.sd_unstratified;
        if (row.sd_stratified)
            r["sd_stratified"] = *row.sd_stratified;
        else
            r["sd_stratified"] = nullptr;
        rows.push_back(r);
    }
    j["rows"] = rows;
    return j;
}

std::string balance_to_text(const balance_report& report) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "covariate" << std::right << std::setw(10)
       << "mean_t" << std::setw(10) << "mean_c" << std::setw(10) << "sd" << std::setw(12)
       << "sd_strat" << '\n';
    for (const balance_row& row : report.rows) {
        os << std::left << std::setw(10) << covariate_name(row.covariate - 1)
           << std::right << std::fixed << std::setprecision(4) << std::setw(10)
           << row.mean_t << std::setw(10) << row.mean_c << std::setw(10)
           << row.sd_unstratified;
        if (row.sd_stratified)
            os << std::setw(12) << *row.sd_stratified;
        else
            os << std::setw(12) << "-";
        os << '\n';
    }
    return os.str();
}

int cmd_balance(const balance_args& a) {
    dataset data = load_dataset(a.data);
    std::optional<stratification_plan> plan;
    if (data.all_have_propensity()) {
        if (a.prognostic_bins > 0 && !data.all_have_prognostic())
            throw validation_error(
                "balance --prognostic-bins needs prognostic scores on every subject");
        plan = build_plan(data, a.strata, a.min_arm, a.prognostic_bins);
    }
    balance_report report = standardized_differences(data, plan ? &*plan : nullptr);

    std::cout << balance_to_text(report);
    if (plan)
        std::cout << "stratified column uses " << plan->strata.size()
                  << " strata, common-support weight "
                  << format_double(report.common_weight) << '\n';
    else
        std::cout << "no propensity scores; stratified column omitted\n";

    if (!a.out.empty()) {
        fs::path dir = prepare_out_dir(a.out);
        write_text(dir / "balance.csv", balance_to_csv(report));
        write_text(dir / "balance.json", balance_to_json(report).dump(2) + "\n");
        ordered_json cfg;
        cfg["data"] = a.data;
        cfg["strata"] = a.strata;
        cfg["min_arm"] = a.min_arm;
        cfg["prognostic_bins"] = a.prognostic_bins;
        write_manifest(dir, "balance", cfg, {"balance.csv", "balance.json"});
        std::cout << "wrote " << (dir / "balance.csv").string() << " (+json)\n";
    }
    return 0;
}

struct estimate_args {
    std::string data, out;
    std::string methods = "odb,rct,weighted,spiked,dynamic,dual_spiked";
    std::string fallback = "strict";
    std::string propensity_model, prognostic_model;
    int k = 10;
    long min_arm = 1;
    int prognostic_bins = 3;
    double p_r = 0.5;
};

int cmd_estimate(const estimate_args& a) {
    dataset data = load_dataset(a.data);
    estimate_options options;
    options.methods = parse_methods(a.methods);
    options.policy = parse_policy(a.fallback);
    options.prognostic_bins = a.prognostic_bins;
    if (std::find(options.methods.begin(), options.methods.end(), method::oracle) !=
        options.methods.end())
        throw validation_error(
            "the oracle needs simulation-known truth; it is available under simulate "
            "only");

    if (!data.all_have_propensity()) {
        if (a.propensity_model.empty())
            throw validation_error(
                "estimate needs propensity scores: the dataset has no propensity "
                "column and no --propensity-model was given");
        data = score_dataset(model_from_json(read_text(a.propensity_model)), data,
                             score_target::propensity);
    }
    bool needs_prognostic =
        std::find(options.methods.begin(), options.methods.end(), method::dual_spiked) !=
        options.methods.end();
    if (needs_prognostic && !data.all_have_prognostic()) {
        if (a.prognostic_model.empty())
            throw validation_error(
                "dual_spiked needs prognostic scores: the dataset has no prognostic "
                "column and no --prognostic-model was given");
        data = score_dataset(model_from_json(read_text(a.prognostic_model)), data,
                             score_target::prognostic);
    }

    stratification_plan plan = build_plan(data, a.k, a.min_arm, 0);
    rct_design design;
    design.p_r = a.p_r;
    estimate_report report = estimate_all(data, plan, design, options);

    fs::path dir = prepare_out_dir(a.out);
    write_text(dir / "report.json", report_to_json(report));
    write_text(dir / "report.csv", report_to_csv(report));

    ordered_json cfg;
    cfg["data"] = a.data;
    cfg["k"] = a.k;
    cfg["min_arm"] = a.min_arm;
    cfg["methods"] = methods_string(options.methods);
    cfg["fallback"] = to_string(options.policy);
    cfg["prognostic_bins"] = a.prognostic_bins;
    cfg["p_r"] = a.p_r;
    cfg["propensity_model"] = a.propensity_model;
    cfg["prognostic_model"] = a.prognostic_model;
    write_manifest(dir, "estimate", cfg, {"report.json", "report.csv"});

    std::cout << "n_odb " << report.n_odb << ", n_rct " << report.n_rct << ", strata "
              << plan.strata.size() << '\n';
    for (const method_report& mr : report.methods) {
        std::cout << std::left << std::setw(12) << to_string(mr.m);
        if (mr.defined) {
            std::cout << "tau " << format_double(mr.tau);
            if (mr.excluded_weight > 0)
                std::cout << "  (excluded weight " << format_double(mr.excluded_weight)
                          << ")";
        } else {
            std::cout << "undefined";
        }
        std::cout << '\n';
    }
    std::cout << "wrote " << (dir / "report.json").string() << " (+csv)\n";
    return 0;
}

struct bootstrap_args {
    std::string odb, rct, out;
    std::string methods = "naive_odb,odb,rct,weighted,spiked,dual_spiked,dynamic";
    std::string policy = "renormalize";
    double reference = 0.0;
    long reps = 100;
    long rct_size = 0;  // 0 keeps the trial's own size
    int k = 10;
    long min_arm = 1;
    int prognostic_bins = 3;
    double p_r = 0.5;
    std::uint64_t seed = 0;
    bool keep_draws = false;
};

int cmd_bootstrap(const bootstrap_args& a) {
    dataset odb_data = load_dataset(a.odb);
    dataset rct_data = load_dataset(a.rct);
    if (odb_data.n_rct() > 0)
        throw validation_error("--odb file contains trial subjects");
    if (rct_data.n_odb() > 0)
        throw validation_error("--rct file contains database subjects");
    if (odb_data.dims() != rct_data.dims())
        throw validation_error("--odb and --rct files disagree on covariate count");
    std::vector<subject> all = odb_data.subjects();
    all.insert(all.end(), rct_data.subjects().begin(), rct_data.subjects().end());
    dataset data(std::move(all), odb_data.dims());

    bootstrap_options options;
    options.replicates = a.reps;
    if (a.rct_size > 0) options.rct_size = a.rct_size;
    options.k = a.k;
    options.min_arm = a.min_arm;
    options.prognostic_bins = a.prognostic_bins;
    options.methods = parse_methods(a.methods);
    options.policy = parse_policy(a.policy);
    options.p_r = a.p_r;
    options.seed = a.seed;

    bootstrap_result result = bootstrap_compare(data, a.reference, options);

    fs::path dir = prepare_out_dir(a.out);
    write_text(dir / "bootstrap.csv", bootstrap_to_csv(result));
    write_text(dir / "bootstrap.json", bootstrap_to_json(result));
    write_text(dir / "bootstrap.txt", bootstrap_to_text(result));
    std::vector<std::string> artifacts = {"bootstrap.csv", "bootstrap.json",
                                          "bootstrap.txt"};
    if (a.keep_draws) {
        write_text(dir / "draws.csv", bootstrap_draws_to_csv(result, options.methods));
        artifacts.push_back("draws.csv");
    }

    ordered_json cfg;
    cfg["odb"] = a.odb;
    cfg["rct"] = a.rct;
    cfg["reference"] = a.reference;
    cfg["reps"] = a.reps;
    cfg["rct_size"] = a.rct_size;
    cfg["k"] = a.k;
    cfg["min_arm"] = a.min_arm;
    cfg["prognostic_bins"] = a.prognostic_bins;
    cfg["methods"] = methods_string(options.methods);
    cfg["policy"] = to_string(options.policy);
    cfg["p_r"] = a.p_r;
    cfg["seed"] = a.seed;
    cfg["keep_draws"] = a.keep_draws;
    write_manifest(dir, "bootstrap", cfg, artifacts);

    std::cout << bootstrap_to_text(result);
    std::cout << "wrote " << (dir / "bootstrap.csv").string() << " (+json, txt)\n";
    return 0;
}

int cmd_report(const std::string& in) {
    fs::path dir(in);
    if (fs::exists(dir / "mse.json")) {
        mse_table table = mse_table_from_json(read_text(dir / "mse.json"));
        std::cout << mse_table_to_text(table);
        return 0;
    }
    if (fs::exists(dir / "bootstrap.txt")) {
        std::cout << read_text(dir / "bootstrap.txt");
        return 0;
    }
    throw validation_error("no renderable run in " + in +
                           " (expected mse.json or bootstrap.txt)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"treatment-effect estimation by spiking a trial into propensity "
                 "strata of an observational database"};
    app.require_subcommand(1);

    // Config files hold one [subcommand] section of key = value lines; flags
    // given on the command line override config values.
    std::map<std::string, std::string> config_paths;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_paths[sub->get_name()],
                        "key = value config file with a [" + sub->get_name() +
                            "] section; flags override config");
    };

    simulate_args sim;
    CLI::App* c_sim = app.add_subcommand(
        "simulate", "run the comparative-MSE experiment grid for a scenario file");
    c_sim->add_option("--scenario", sim.scenario, "scenario grid file")
        ->required()
        ->check(CLI::ExistingFile);
    c_sim->add_option("--out", sim.out, "output directory")->required();
    c_sim->add_option("--seed", sim.seed, "master seed (required)")->required();
    c_sim->add_option("--threads", sim.threads, "worker threads (0 = machine cores)");
    c_sim->add_option("--methods", sim.methods, "comma-separated estimator list");
    c_sim->add_option("--policy", sim.policy, "strict|renormalize|cross");
    c_sim->add_option("--cov-draws", sim.cov_draws,
                      "override the scenario's covariate draw count");
    c_sim->add_option("--assign-draws", sim.assign_draws,
                      "override the scenario's assignment redraw count");
    c_sim->add_option("--max-excluded", sim.max_excluded,
                      "highest tolerated excluded-replicate fraction");
    c_sim->add_flag("--keep-draws", sim.keep_draws, "write replicate-level draws.csv");
    add_config(c_sim);

    fit_args fitp;
    CLI::App* c_fitp = app.add_subcommand(
        "fit-propensity", "stepwise logistic treatment model on database rows");
    c_fitp->add_option("--data", fitp.data, "dataset csv")->required()
        ->check(CLI::ExistingFile);
    c_fitp->add_option("--out", fitp.out, "output directory")->required();
    c_fitp->add_option("--max-vars", fitp.max_vars, "forward-selection cap");
    c_fitp->add_option("--folds", fitp.folds, "cross-validation folds");
    c_fitp->add_option("--stop-bp", fitp.stop_bp,
                       "cv-auc gain, in basis points, a size must add to be kept");
    c_fitp->add_option("--seed", fitp.seed, "fold-shuffle seed");
    c_fitp->add_option("--scored-out", fitp.scored_out,
                       "write the dataset with propensity scores filled in");
    add_config(c_fitp);

    fit_args fitg;
    fitg.max_vars = 25;
    CLI::App* c_fitg = app.add_subcommand(
        "fit-prognostic",
        "stepwise logistic outcome model on database control rows");
    c_fitg->add_option("--data", fitg.data, "dataset csv")->required()
        ->check(CLI::ExistingFile);
    c_fitg->add_option("--out", fitg.out, "output directory")->required();
    c_fitg->add_option("--max-vars", fitg.max_vars, "forward-selection cap");
    c_fitg->add_option("--folds", fitg.folds, "cross-validation folds");
    c_fitg->add_option("--stop-bp", fitg.stop_bp,
                       "cv-auc gain, in basis points, a size must add to be kept");
    c_fitg->add_option("--seed", fitg.seed, "fold-shuffle seed");
    c_fitg->add_option("--scored-out", fitg.scored_out,
                       "write the dataset with prognostic scores filled in");
    add_config(c_fitg);

    stratify_args str;
    CLI::App* c_str = app.add_subcommand(
        "stratify", "equal-width propensity strata with sparse-stratum merging");
    c_str->add_option("--data", str.data, "dataset csv")->required()
        ->check(CLI::ExistingFile);
    c_str->add_option("--out", str.out, "output directory")->required();
    c_str->add_option("--k", str.k, "number of equal-width propensity bins");
    c_str->add_option("--min-arm", str.min_arm,
                      "smallest pooled per-arm count a stratum may keep");
    c_str->add_option("--prognostic-bins", str.prognostic_bins,
                      "equal-depth prognostic sub-bins (0 = none)");
    add_config(c_str);

    balance_args bal;
    CLI::App* c_bal = app.add_subcommand(
        "balance", "standardized covariate differences, raw and within strata");
    c_bal->add_option("--data", bal.data, "dataset csv")->required()
        ->check(CLI::ExistingFile);
    c_bal->add_option("--strata", bal.strata, "number of equal-width propensity bins");
    c_bal->add_option("--min-arm", bal.min_arm,
                      "smallest pooled per-arm count a stratum may keep");
    c_bal->add_option("--prognostic-bins", bal.prognostic_bins,
                      "equal-depth prognostic sub-bins (0 = none)");
    c_bal->add_option("--out", bal.out, "output directory (optional)");
    add_config(c_bal);

    estimate_args est;
    CLI::App* c_est = app.add_subcommand(
        "estimate", "stratum-level and overall treatment-effect estimates");
    c_est->add_option("--data", est.data, "dataset csv")->required()
        ->check(CLI::ExistingFile);
    c_est->add_option("--out", est.out, "output directory")->required();
    c_est->add_option("--k", est.k, "number of equal-width propensity bins");
    c_est->add_option("--min-arm", est.min_arm,
                      "smallest pooled per-arm count a stratum may keep");
    c_est->add_option("--methods", est.methods, "comma-separated estimator list");
    c_est->add_option("--fallback", est.fallback,
                      "undefined-stratum policy: strict|renormalize|cross");
    c_est->add_option("--prognostic-bins", est.prognostic_bins,
                      "prognostic sub-bins for dual_spiked");
    c_est->add_option("--p-r", est.p_r, "trial treatment probability");
    c_est->add_option("--propensity-model", est.propensity_model,
                      "score propensity from this model json when the column is absent");
    c_est->add_option("--prognostic-model", est.prognostic_model,
                      "score prognostic from this model json when the column is absent");
    add_config(c_est);

    bootstrap_args boot;
    CLI::App* c_boot = app.add_subcommand(
        "bootstrap", "resampled method comparison against a reference effect");
    c_boot->add_option("--odb", boot.odb, "database dataset csv")->required()
        ->check(CLI::ExistingFile);
    c_boot->add_option("--rct", boot.rct, "trial dataset csv")->required()
        ->check(CLI::ExistingFile);
    c_boot->add_option("--reference", boot.reference, "reference effect (required)")
        ->required();
    c_boot->add_option("--out", boot.out, "output directory")->required();
    c_boot->add_option("--seed", boot.seed, "master seed (required)")->required();
    c_boot->add_option("--reps", boot.reps, "bootstrap replicates");
    c_boot->add_option("--rct-size", boot.rct_size,
                       "trial resample size (0 = the trial's own size)");
    c_boot->add_option("--k", boot.k, "number of equal-width propensity bins");
    c_boot->add_option("--min-arm", boot.min_arm,
                       "smallest pooled per-arm count a stratum may keep");
    c_boot->add_option("--prognostic-bins", boot.prognostic_bins,
                       "prognostic sub-bins for dual_spiked");
    c_boot->add_option("--methods", boot.methods, "comma-separated estimator list");
    c_boot->add_option("--policy", boot.policy, "strict|renormalize|cross");
    c_boot->add_option("--p-r", boot.p_r, "trial treatment probability");
    c_boot->add_flag("--keep-draws", boot.keep_draws,
                     "write replicate-level draws.csv");
    add_config(c_boot);

    std::string report_in;
    CLI::App* c_rep =
        app.add_subcommand("report", "render a run directory as a text table");
    c_rep->add_option("--in", report_in, "run directory")->required();

    // Flag-only option names per subcommand, for config-file boolean handling.
    const std::vector<std::string> flag_names = {"keep-draws"};

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        // Pre-pass: find the subcommand and an explicit --config, then inject
        // config entries for flags the command line leaves unset.
        std::string subcommand;
        std::string config_file;
        for (std::size_t i = 0; i < args.size(); ++i) {
            const std::string& a = args[i];
            if (subcommand.empty() && !a.empty() && a[0] != '-') {
                subcommand = a;
                continue;
            }
            if (a == "--config" && i + 1 < args.size()) config_file = args[i + 1];
            if (a.rfind("--config=", 0) == 0) config_file = a.substr(9);
        }
        if (!config_file.empty() && !subcommand.empty())
            args = inject_config(args, subcommand, config_file, flag_names);

        // CLI11 wants reversed arguments for the vector overload.
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);

        if (c_sim->parsed()) return cmd_simulate(sim);
        if (c_fitp->parsed()) return cmd_fit(fitp, score_target::propensity);
        if (c_fitg->parsed()) return cmd_fit(fitg, score_target::prognostic);
        if (c_str->parsed()) return cmd_stratify(str);
        if (c_bal->parsed()) return cmd_balance(bal);
        if (c_est->parsed()) return cmd_estimate(est);
        if (c_boot->parsed()) return cmd_bootstrap(boot);
        if (c_rep->parsed()) return cmd_report(report_in);
        return 1;  // unreachable: require_subcommand enforces one
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const CLI::App* scope = &app;
        for (const CLI::App* s : app.get_subcommands())
            scope = s;  // narrow usage to the subcommand being parsed
        std::cerr << scope->help();
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
