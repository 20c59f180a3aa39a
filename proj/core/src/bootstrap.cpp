#include "spikestrat/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "spikestrat/csv.hpp"
#include "spikestrat/ksum.hpp"
#include "spikestrat/rng.hpp"
#include "spikestrat/strata.hpp"

namespace spikestrat {

bootstrap_result bootstrap_compare(const dataset& data, double reference_tau,
                                   const bootstrap_options& options) {
    if (options.replicates < 1)
        throw std::invalid_argument("need at least one bootstrap replicate");
    if (options.methods.empty())
        throw std::invalid_argument("at least one method is required");
    if (!data.all_have_propensity())
        throw std::invalid_argument(
            "bootstrap needs propensity scores on every subject; score the data first");
    bool wants_dual = std::find(options.methods.begin(), options.methods.end(),
                                method::dual_spiked) != options.methods.end();
    if (wants_dual && !data.all_have_prognostic())
        throw std::invalid_argument(
            "dual_spiked needs prognostic scores on every subject; score the data first");
    if (data.n_odb() == 0 || data.n_rct() == 0)
        throw std::invalid_argument("bootstrap needs both database and trial subjects");

    std::vector<std::size_t> odb_idx, rct_idx;
    for (std::size_t i = 0; i < data.subjects().size(); ++i)
        (data.subjects()[i].source == source_kind::odb ? odb_idx : rct_idx).push_back(i);
    const long rct_draw = options.rct_size.value_or(static_cast<long>(rct_idx.size()));
    if (rct_draw < 1) throw std::invalid_argument("trial resample size must be positive");

    bootstrap_result result;
    result.reference_tau = reference_tau;
    result.replicates = options.replicates;
    result.draws.resize(static_cast<std::size_t>(options.replicates));

    for (long r = 0; r < options.replicates; ++r) {
        rng_stream rng_o(options.seed, "boot_odb", static_cast<std::uint64_t>(r));
        rng_stream rng_r(options.seed, "boot_rct", static_cast<std::uint64_t>(r));
        std::vector<subject> resampled;
        resampled.reserve(odb_idx.size() + static_cast<std::size_t>(rct_draw));
        for (std::size_t i = 0; i < odb_idx.size(); ++i)
            resampled.push_back(data.subjects()[odb_idx[rng_o.below(odb_idx.size())]]);
        for (long i = 0; i < rct_draw; ++i)
            resampled.push_back(data.subjects()[rct_idx[rng_r.below(rct_idx.size())]]);
        dataset replicate(std::move(resampled), data.dims());

        auto& row = result.draws[static_cast<std::size_t>(r)];
        row.assign(options.methods.size(), std::nullopt);
        try {
            stratification_plan plan = make_equal_width_strata(replicate, options.k);
            if (options.min_arm > 0)
                plan = merge_sparse_strata(replicate, plan, options.min_arm);
            estimate_options eo;
            eo.methods = options.methods;
            eo.policy = options.policy;
            eo.prognostic_bins = options.prognostic_bins;
            estimate_report rep = estimate_all(replicate, plan, {options.p_r}, eo);
            for (std::size_t m = 0; m < rep.methods.size(); ++m)
                if (rep.methods[m].defined) row[m] = rep.methods[m].tau;
        } catch (const std::exception&) {
            // leave the whole replicate undefined
        }
    }

    result.cells.resize(options.methods.size());
    for (std::size_t m = 0; m < options.methods.size(); ++m) {
        bootstrap_cell& cell = result.cells[m];
        cell.m = options.methods[m];
        ksum sum, sum2;
        for (const auto& row : result.draws) {
            if (!row[m]) continue;
            ++cell.defined;
            sum += *row[m];
            sum2 += *row[m] * *row[m];
        }
        if (cell.defined == 0) continue;
        cell.mean = ksum_mean(sum, static_cast<std::size_t>(cell.defined));
        double mean2 = ksum_mean(sum2, static_cast<std::size_t>(cell.defined));
        cell.bias = cell.mean - reference_tau;
        cell.variance = std::max(mean2 - cell.mean * cell.mean, 0.0);
        cell.rmse = std::sqrt(cell.bias * cell.bias + cell.variance);
    }
    return result;
}

std::string bootstrap_to_csv(const bootstrap_result& result) {
    std::ostringstream os;
    os << "method,defined,mean,bias,variance,rmse\n";
    for (const bootstrap_cell& cell : result.cells) {
        os << to_string(cell.m) << ',' << cell.defined << ',' << format_double(cell.mean)
           << ',' << format_double(cell.bias) << ',' << format_double(cell.variance)
           << ',' << format_double(cell.rmse) << '\n';
    }
    return os.str();
}

std::string bootstrap_to_json(const bootstrap_result& result) {
    nlohmann::ordered_json root;
    root["reference_tau"] = result.reference_tau;
    root["replicates"] = result.replicates;
    root["methods"] = nlohmann::ordered_json::array();
    for (const bootstrap_cell& cell : result.cells) {
        nlohmann::ordered_json jc;
        jc["method"] = to_string(cell.m);
        jc["defined"] = cell.defined;
        jc["mean"] = cell.mean;
        jc["bias"] = cell.bias;
        jc["variance"] = cell.variance;
        jc["rmse"] = cell.rmse;
        root["methods"].push_back(std::move(jc));
    }
    return root.dump(2) + "\n";
}

std::string bootstrap_to_text(const bootstrap_result& result) {
    std::ostringstream os;
    os << std::left << std::setw(12) << "method" << std::right << std::setw(9)
       << "defined" << std::setw(12) << "mean" << std::setw(12) << "bias"
       << std::setw(12) << "variance" << std::setw(12) << "rmse" << '\n';
    for (const bootstrap_cell& cell : result.cells) {
        os << std::left << std::setw(12) << to_string(cell.m) << std::right
           << std::setw(9) << cell.defined << std::fixed << std::setprecision(4)
           << std::setw(12) << cell.mean << std::setw(12) << cell.bias << std::setw(12)
           << cell.variance << std::setw(12) << cell.rmse << '\n';
        os.unsetf(std::ios::fixed);
    }
    return os.str();
}

std::string bootstrap_draws_to_csv(const bootstrap_result& result,
                                   const std::vector<method>& methods) {
    std::ostringstream os;
    os << "replicate";
    for (method m : methods) os << ',' << to_string(m);
    os << '\n';
    for (std::size_t r = 0; r < result.draws.size(); ++r) {
        os << r + 1;
        for (const auto& t : result.draws[r]) {
            os << ',';
            if (t) os << format_double(*t);
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace spikestrat
