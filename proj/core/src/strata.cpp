#include "spikestrat/strata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spikestrat {

namespace {

void tally(const dataset& data, stratification_plan& plan) {
    for (auto& st : plan.strata) {
        st.n_odb = st.n_rct = 0;
        st.n_odb_t = st.n_odb_c = st.n_rct_t = st.n_rct_c = 0;
        st.weight = 0.0;
    }
    const auto& subjects = data.subjects();
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        stratum_info& st = plan.strata[static_cast<std::size_t>(plan.assignment[i])];
        const subject& s = subjects[i];
        if (s.source == source_kind::odb) {
            ++st.n_odb;
            (s.w == 1 ? st.n_odb_t : st.n_odb_c)++;
        } else {
            ++st.n_rct;
            (s.w == 1 ? st.n_rct_t : st.n_rct_c)++;
        }
    }
    if (data.n_odb() > 0) {
        for (auto& st : plan.strata) {
            st.weight = static_cast<double>(st.n_odb) / static_cast<double>(data.n_odb());
        }
    }
}

}  // namespace

int bin_of_score(double e, int k) {
    if (k < 1) throw std::invalid_argument("bin_of_score: need at least 1 stratum");
    // Locate by comparison against the stored edge doubles so that a score
    // equal to an edge lands in the lower interval.
    int bin = static_cast<int>(std::floor(e * k)) + 1;
    bin = std::clamp(bin, 1, k);
    while (bin < k && e > static_cast<double>(bin) / static_cast<double>(k)) ++bin;
    while (bin > 1 && e <= static_cast<double>(bin - 1) / static_cast<double>(k)) --bin;
    return bin;
}

stratification_plan make_equal_width_strata(const dataset& data, int k) {
    if (k < 1) throw std::invalid_argument("make_equal_width_strata: need at least 1 stratum");
    if (data.subjects().empty()) {
        throw std::invalid_argument("make_equal_width_strata: empty dataset");
    }

    stratification_plan plan;
    plan.k_requested = k;
    plan.strata.resize(static_cast<std::size_t>(k));
    std::vector<double> edges(static_cast<std::size_t>(k) + 1);
    for (int j = 0; j <= k; ++j) {
        edges[static_cast<std::size_t>(j)] = static_cast<double>(j) / static_cast<double>(k);
    }
    for (int j = 0; j < k; ++j) {
        auto& st = plan.strata[static_cast<std::size_t>(j)];
        st.e_lo = edges[static_cast<std::size_t>(j)];
        st.e_hi = edges[static_cast<std::size_t>(j) + 1];
        st.merged_from = {j + 1};
    }

    plan.assignment.resize(data.subjects().size());
    const auto& subjects = data.subjects();
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        const subject& s = subjects[i];
        if (!s.e) {
            throw std::invalid_argument("make_equal_width_strata: subject " + s.id +
                                        " has no propensity score");
        }
        plan.assignment[i] = bin_of_score(*s.e, k) - 1;
    }
    tally(data, plan);
    return plan;
}

stratification_plan merge_sparse_strata(const dataset& data, const stratification_plan& plan,
                                        long min_arm) {
    if (min_arm < 0) throw std::invalid_argument("merge_sparse_strata: min_arm must be >= 0");
    if (plan.strata.empty()) throw std::invalid_argument("merge_sparse_strata: empty plan");

    const std::size_t k0 = plan.strata.size();
    bool any_members = false;
    for (const auto& st : plan.strata) {
        if (st.n_odb + st.n_rct > 0) any_members = true;
    }
    if (!any_members) throw std::invalid_argument("merge_sparse_strata: all strata are empty");

    // group[j] = merged group of original position j; groups stay contiguous
    // in plan order only when neighbors are adjacent, so track membership
    // explicitly.
    std::vector<int> group(k0);
    for (std::size_t j = 0; j < k0; ++j) group[j] = static_cast<int>(j);

    auto pooled_counts = [&](int g, long& t, long& c, long& members) {
        t = c = members = 0;
        for (std::size_t j = 0; j < k0; ++j) {
            if (group[j] != g) continue;
            const auto& st = plan.strata[j];
            t += st.n_odb_t + st.n_rct_t;
            c += st.n_odb_c + st.n_rct_c;
            members += st.n_odb + st.n_rct;
        }
    };

    // Representative position of a group = its lowest original position.
    auto group_pos = [&](int g) {
        for (std::size_t j = 0; j < k0; ++j) {
            if (group[j] == g) return static_cast<int>(j);
        }
        return -1;
    };

    while (true) {
        // Distinct live groups in position order.
        std::vector<int> groups;
        for (std::size_t j = 0; j < k0; ++j) {
            if (std::find(groups.begin(), groups.end(), group[j]) == groups.end()) {
                groups.push_back(group[j]);
            }
        }
        if (groups.size() <= 1) break;

        int victim = -1;
        for (int g : groups) {
            long t, c, members;
            pooled_counts(g, t, c, members);
            if (t < min_arm || c < min_arm) {
                victim = g;
                break;
            }
        }
        if (victim == -1) break;

        // Nearest group with any members, distance in group-order positions,
        // ties toward the lower position.
        int vpos = 0;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            if (groups[gi] == victim) vpos = static_cast<int>(gi);
        }
        // Composite plans keep sub-strata of one propensity stratum adjacent;
        // penalizing cross-parent merges makes siblings absorb each other
        // before a merge ever crosses a propensity boundary.
        auto parent_of = [&](int g) { return plan.strata[static_cast<std::size_t>(group_pos(g))].parent; };
        int best = -1, best_dist = std::numeric_limits<int>::max();
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            int g = groups[gi];
            if (g == victim) continue;
            long t, c, members;
            pooled_counts(g, t, c, members);
            if (members == 0) continue;
            int dist = std::abs(static_cast<int>(gi) - vpos);
            if (plan.composite && parent_of(g) != parent_of(victim)) dist += 1000000;
            if (dist < best_dist) {
                best_dist = dist;
                best = g;
            }
        }
        if (best == -1) break;  // nothing with members to merge into
        int keep = std::min(group_pos(victim), group_pos(best)) ==
                           group_pos(victim) ? victim : best;
        int gone = keep == victim ? best : victim;
        for (std::size_t j = 0; j < k0; ++j) {
            if (group[j] == gone) group[j] = keep;
        }
    }

    // Rebuild strata in order of first appearance.
    std::vector<int> order;
    std::vector<int> new_index(k0, -1);
    for (std::size_t j = 0; j < k0; ++j) {
        if (new_index[static_cast<std::size_t>(group[j])] == -1) {
            new_index[static_cast<std::size_t>(group[j])] = static_cast<int>(order.size());
            order.push_back(group[j]);
        }
    }

    stratification_plan out;
    out.k_requested = plan.k_requested;
    out.composite = plan.composite;
    out.strata.resize(order.size());
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        stratum_info merged;
        merged.e_lo = std::numeric_limits<double>::infinity();
        merged.e_hi = -std::numeric_limits<double>::infinity();
        merged.prog_lo = std::numeric_limits<double>::infinity();
        merged.prog_hi = -std::numeric_limits<double>::infinity();
        bool first = true;
        for (std::size_t j = 0; j < k0; ++j) {
            if (group[j] != order[oi]) continue;
            const auto& st = plan.strata[j];
            merged.e_lo = std::min(merged.e_lo, st.e_lo);
            merged.e_hi = std::max(merged.e_hi, st.e_hi);
            merged.prog_lo = std::min(merged.prog_lo, st.prog_lo);
            merged.prog_hi = std::max(merged.prog_hi, st.prog_hi);
            merged.merged_from.insert(merged.merged_from.end(), st.merged_from.begin(),
                                      st.merged_from.end());
            if (first) {
                merged.parent = st.parent;
                first = false;
            } else if (merged.parent != st.parent) {
                merged.parent = -1;  // crosses propensity strata
            }
        }
        std::sort(merged.merged_from.begin(), merged.merged_from.end());
        out.strata[oi] = std::move(merged);
    }
    out.assignment.resize(plan.assignment.size());
    for (std::size_t i = 0; i < plan.assignment.size(); ++i) {
        out.assignment[i] =
            new_index[static_cast<std::size_t>(group[static_cast<std::size_t>(plan.assignment[i])])];
    }
    tally(data, out);
    return out;
}

stratification_plan sub_stratify_prognostic(const dataset& data,
                                            const stratification_plan& plan, int bins) {
    if (bins < 1) throw std::invalid_argument("sub_stratify_prognostic: need at least 1 bin");
    if (plan.composite) {
        throw std::invalid_argument("sub_stratify_prognostic: plan is already composite");
    }
    const auto& subjects = data.subjects();
    for (const subject& s : subjects) {
        if (!s.prog) {
            throw std::invalid_argument("sub_stratify_prognostic: subject " + s.id +
                                        " has no prognostic score");
        }
    }

    const std::size_t kp = plan.strata.size();
    // Per parent: quantile edges from ODB members, duplicates collapsed.
    std::vector<std::vector<double>> edges(kp);
    for (std::size_t parent = 0; parent < kp; ++parent) {
        std::vector<double> scores;
        for (std::size_t i = 0; i < subjects.size(); ++i) {
            if (plan.assignment[i] == static_cast<int>(parent) &&
                subjects[i].source == source_kind::odb) {
                scores.push_back(*subjects[i].prog);
            }
        }
        if (scores.empty()) continue;  // parent without ODB members stays whole
        std::sort(scores.begin(), scores.end());
        std::vector<double>& e = edges[parent];
        for (int j = 1; j < bins; ++j) {
            // Edge below the first member of sub-bin j+1: rank ceil(j*n/bins).
            std::size_t rank = (static_cast<std::size_t>(j) * scores.size() + bins - 1) /
                               static_cast<std::size_t>(bins);
            if (rank == 0 || rank >= scores.size()) continue;
            double v = scores[rank - 1];
            if (e.empty() || v > e.back()) e.push_back(v);
        }
    }

    // Provisional sub-stratum ids, then drop empty ones.
    stratification_plan out;
    out.k_requested = plan.k_requested;
    out.composite = true;
    std::vector<int> base(kp + 1, 0);
    for (std::size_t parent = 0; parent < kp; ++parent) {
        base[parent + 1] = base[parent] + static_cast<int>(edges[parent].size()) + 1;
    }
    std::vector<int> provisional(subjects.size());
    std::vector<long> counts(static_cast<std::size_t>(base[kp]), 0);
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        const int parent = plan.assignment[i];
        const auto& e = edges[static_cast<std::size_t>(parent)];
        const double v = *subjects[i].prog;
        int sub = 0;
        while (sub < static_cast<int>(e.size()) && v > e[static_cast<std::size_t>(sub)]) ++sub;
        provisional[i] = base[static_cast<std::size_t>(parent)] + sub;
        ++counts[static_cast<std::size_t>(provisional[i])];
    }
    std::vector<int> compact(counts.size(), -1);
    for (std::size_t parent = 0; parent < kp; ++parent) {
        const auto& e = edges[parent];
        const auto& pst = plan.strata[parent];
        for (int sub = 0; sub <= static_cast<int>(e.size()); ++sub) {
            const std::size_t pid = static_cast<std::size_t>(base[parent] + sub);
            if (counts[pid] == 0) continue;
            compact[pid] = static_cast<int>(out.strata.size());
            stratum_info st;
            st.e_lo = pst.e_lo;
            st.e_hi = pst.e_hi;
            st.merged_from = pst.merged_from;
            st.parent = static_cast<int>(parent);
            st.prog_lo = sub == 0 ? -std::numeric_limits<double>::infinity()
                                  : e[static_cast<std::size_t>(sub) - 1];
            st.prog_hi = sub == static_cast<int>(e.size())
                             ? std::numeric_limits<double>::infinity()
                             : e[static_cast<std::size_t>(sub)];
            out.strata.push_back(std::move(st));
        }
    }
    out.assignment.resize(subjects.size());
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        out.assignment[i] = compact[static_cast<std::size_t>(provisional[i])];
    }
    tally(data, out);
    return out;
}

bool same_assignment(const stratification_plan& a, const stratification_plan& b) {
    return a.assignment == b.assignment && a.strata.size() == b.strata.size();
}

}  // namespace spikestrat
