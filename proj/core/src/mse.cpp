#include "spikestrat/mse.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "spikestrat/csv.hpp"
#include "spikestrat/ksum.hpp"
#include "spikestrat/strata.hpp"

namespace spikestrat {

namespace {

using ordered_json = nlohmann::ordered_json;

void run_one_row(const scenario_spec& spec, const mse_options& options, int row_index,
                 std::vector<replicate_record>& records) {
    const int n_cov = spec.n_cov_draws;
    const int n_assign = spec.n_assign_draws;
    records.assign(static_cast<std::size_t>(n_cov) * static_cast<std::size_t>(n_assign),
                   replicate_record{});

    std::atomic<int> next_cov{0};
    auto worker = [&]() {
        while (true) {
            int c = next_cov.fetch_add(1);
            if (c >= n_cov) return;
            covariate_realization cov = draw_covariates(spec, static_cast<std::uint64_t>(c));
            oracle_inputs truth = oracle_truth(spec, cov);
            for (int a = 0; a < n_assign; ++a) {
                replicate_record rec;
                rec.row = row_index;
                rec.cov_draw = c;
                rec.assign_draw = a;
                rec.true_tau = cov.true_tau;
                rec.tau.assign(options.methods.size(), std::nullopt);
                try {
                    dataset data =
                        assign_treatments(spec, cov, static_cast<std::uint64_t>(a));
                    stratification_plan plan = make_equal_width_strata(data, spec.k);
                    estimate_options eo;
                    eo.methods = options.methods;
                    eo.policy = options.policy;
                    eo.oracle = &truth;
                    estimate_report rep = estimate_all(data, plan, {spec.p_r}, eo);
                    for (std::size_t m = 0; m < rep.methods.size(); ++m) {
                        if (rep.methods[m].defined) rec.tau[m] = rep.methods[m].tau;
                        else rec.excluded = true;
                    }
                } catch (const std::exception&) {
                    rec.excluded = true;
                }
                records[static_cast<std::size_t>(c) * static_cast<std::size_t>(n_assign) +
                        static_cast<std::size_t>(a)] = std::move(rec);
            }
        }
    };

    unsigned n_threads = options.threads > 0
                             ? static_cast<unsigned>(options.threads)
                             : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(n_cov));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
}

}  // namespace

char effect_letter(effect_shape shape) {
    switch (shape) {
        case effect_shape::constant: return 'c';
        case effect_shape::linear_bin:
        case effect_shape::linear_propensity: return 'l';
        case effect_shape::quadratic_bin:
        case effect_shape::quadratic_propensity: return 'q';
    }
    return '?';
}

std::string row_label(const mse_row& row) {
    std::string s;
    s += effect_letter(row.shape);
    s += ',';
    s += row.correlated ? 'y' : 'n';
    s += ',';
    s += std::to_string(row.norm2);
    return s;
}

mse_table run_mse_experiment(const scenario_grid& grid, const mse_options& options) {
    if (options.methods.empty())
        throw std::invalid_argument("at least one method is required");
    // Row specs are validated inside draw_covariates; the base spec alone
    // carries no gamma and is not directly runnable.
    mse_table table;
    table.methods = options.methods;
    int row_index = 0;
    for (effect_shape shape : grid.effects) {
        for (const std::string& gname : grid.gammas) {
            scenario_spec spec = row_spec(grid, shape, gname);
            std::vector<replicate_record> records;
            run_one_row(spec, options, row_index, records);

            mse_row row;
            row.shape = shape;
            row.gamma_name = gname;
            // Label metadata from the resolved vectors so custom gammas work.
            double dot = 0, norm2 = 0;
            for (std::size_t j = 0; j < spec.gamma.size(); ++j) {
                dot += spec.gamma[j] * spec.beta[j];
                norm2 += spec.gamma[j] * spec.gamma[j];
            }
            row.correlated = std::abs(dot) > 1e-12;
            row.norm2 = static_cast<int>(std::llround(norm2));
            row.total_replicates = static_cast<long>(records.size());

            std::vector<ksum> sum_err(options.methods.size()),
                sum_err2(options.methods.size());
            long included = 0;
            for (const replicate_record& rec : records) {
                if (rec.excluded) {
                    ++row.excluded_replicates;
                    continue;
                }
                ++included;
                for (std::size_t m = 0; m < options.methods.size(); ++m) {
                    double err = *rec.tau[m] - rec.true_tau;
                    sum_err[m] += err;
                    sum_err2[m] += err * err;
                }
            }
            if (static_cast<double>(row.excluded_replicates) >
                options.max_excluded_fraction * static_cast<double>(row.total_replicates))
                throw std::runtime_error(
                    "row " + row_label(row) + ": " +
                    std::to_string(row.excluded_replicates) + " of " +
                    std::to_string(row.total_replicates) +
                    " replicates excluded, above the accepted fraction");
            if (included == 0)
                throw std::runtime_error("row " + row_label(row) +
                                         ": no replicate produced estimates");

            row.cells.resize(options.methods.size());
            for (std::size_t m = 0; m < options.methods.size(); ++m) {
                mse_cell& cell = row.cells[m];
                cell.m = options.methods[m];
                cell.replicates = included;
                cell.bias = ksum_mean(sum_err[m], static_cast<std::size_t>(included));
                cell.mse = ksum_mean(sum_err2[m], static_cast<std::size_t>(included));
                cell.bias2 = cell.bias * cell.bias;
                cell.variance = cell.mse - cell.bias2;
            }
            row.ranking = options.methods;
            std::stable_sort(row.ranking.begin(), row.ranking.end(),
                             [&](method a, method b) {
                                 auto of = [&](method mm) {
                                     for (const auto& cell : row.cells)
                                         if (cell.m == mm) return cell.mse;
                                     return 0.0;
                                 };
                                 return of(a) < of(b);
                             });
            if (options.keep_draws)
                table.draws.insert(table.draws.end(), records.begin(), records.end());
            table.rows.push_back(std::move(row));
            ++row_index;
        }
    }
    return table;
}

std::string mse_table_to_csv(const mse_table& table) {
    std::ostringstream os;
    os << "row,effect,gamma,correlated,norm2,method,mse,bias,bias2,variance,"
          "replicates,excluded,total\n";
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const mse_row& row = table.rows[r];
        for (const mse_cell& cell : row.cells) {
            os << row_label(row) << ',' << to_string(row.shape) << ',' << row.gamma_name
               << ',' << (row.correlated ? 'y' : 'n') << ',' << row.norm2 << ','
               << to_string(cell.m) << ',' << format_double(cell.mse) << ','
               << format_double(cell.bias) << ',' << format_double(cell.bias2) << ','
               << format_double(cell.variance) << ',' << cell.replicates << ','
               << row.excluded_replicates << ',' << row.total_replicates << '\n';
        }
    }
    return os.str();
}

std::string mse_table_to_json(const mse_table& table) {
    ordered_json root;
    root["methods"] = ordered_json::array();
    for (method m : table.methods) root["methods"].push_back(to_string(m));
    root["rows"] = ordered_json::array();
    for (const mse_row& row : table.rows) {
        ordered_json jr;
        jr["label"] = row_label(row);
        jr["effect"] = to_string(row.shape);
        jr["gamma"] = row.gamma_name;
        jr["correlated"] = row.correlated;
        jr["norm2"] = row.norm2;
        jr["total_replicates"] = row.total_replicates;
        jr["excluded_replicates"] = row.excluded_replicates;
        jr["cells"] = ordered_json::array();
        for (const mse_cell& cell : row.cells) {
            ordered_json jc;
            jc["method"] = to_string(cell.m);
            jc["mse"] = cell.mse;
            jc["bias"] = cell.bias;
            jc["bias2"] = cell.bias2;
            jc["variance"] = cell.variance;
            jc["replicates"] = cell.replicates;
            jr["cells"].push_back(std::move(jc));
        }
        jr["ranking"] = ordered_json::array();
        for (method m : row.ranking) jr["ranking"].push_back(to_string(m));
        root["rows"].push_back(std::move(jr));
    }
    return root.dump(2) + "\n";
}

mse_table mse_table_from_json(const std::string& text) {
    nlohmann::json root = nlohmann::json::parse(text);
    mse_table table;
    for (const auto& name : root.at("methods")) {
        auto m = method_from_string(name.get<std::string>());
        if (!m) throw std::invalid_argument("unknown method in table: " +
                                            name.get<std::string>());
        table.methods.push_back(*m);
    }
    for (const auto& jr : root.at("rows")) {
        mse_row row;
        auto shape = effect_shape_from_string(jr.at("effect").get<std::string>());
        if (!shape) throw std::invalid_argument("unknown effect in table");
        row.shape = *shape;
        row.gamma_name = jr.at("gamma").get<std::string>();
        row.correlated = jr.at("correlated").get<bool>();
        row.norm2 = jr.at("norm2").get<int>();
        row.total_replicates = jr.at("total_replicates").get<long>();
        row.excluded_replicates = jr.at("excluded_replicates").get<long>();
        for (const auto& jc : jr.at("cells")) {
            mse_cell cell;
            auto m = method_from_string(jc.at("method").get<std::string>());
            if (!m) throw std::invalid_argument("unknown method in table cell");
            cell.m = *m;
            cell.mse = jc.at("mse").get<double>();
            cell.bias = jc.at("bias").get<double>();
            cell.bias2 = jc.at("bias2").get<double>();
            cell.variance = jc.at("variance").get<double>();
            cell.replicates = jc.at("replicates").get<long>();
            row.cells.push_back(cell);
        }
        for (const auto& name : jr.at("ranking")) {
            auto m = method_from_string(name.get<std::string>());
            if (m) row.ranking.push_back(*m);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string mse_table_to_text(const mse_table& table) {
    std::ostringstream os;
    os << std::left << std::setw(8) << "row";
    for (method m : table.methods) os << std::right << std::setw(12) << to_string(m);
    os << std::right << std::setw(10) << "excluded" << '\n';
    for (const mse_row& row : table.rows) {
        os << std::left << std::setw(8) << row_label(row);
        for (const mse_cell& cell : row.cells)
            os << std::right << std::setw(12) << std::fixed << std::setprecision(4)
               << cell.mse;
        os << std::right << std::setw(10) << row.excluded_replicates << '\n';
        os.unsetf(std::ios::fixed);
    }
    return os.str();
}

std::string draws_to_csv(const mse_table& table) {
    std::ostringstream os;
    os << "row,cov_draw,assign_draw,true_tau,excluded";
    for (method m : table.methods) os << ',' << to_string(m);
    os << '\n';
    for (const replicate_record& rec : table.draws) {
        os << rec.row << ',' << rec.cov_draw << ',' << rec.assign_draw << ','
           << format_double(rec.true_tau) << ',' << (rec.excluded ? 1 : 0);
        for (const auto& t : rec.tau) {
            os << ',';
            if (t) os << format_double(*t);
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace spikestrat
