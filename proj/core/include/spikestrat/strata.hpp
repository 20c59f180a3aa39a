#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spikestrat/dataset.hpp"

namespace spikestrat {

// One stratum of a plan. Propensity interval is (e_lo, e_hi]; composite
// strata additionally carry a prognostic interval (prog_lo, prog_hi] and the
// index of the propensity stratum they subdivide. merged_from lists the
// original equal-width bin numbers (1-based) the stratum covers.
struct stratum_info {
    double e_lo = 0.0, e_hi = 1.0;
    std::vector<int> merged_from;
    int parent = -1;  // propensity stratum index for composite strata
    double prog_lo = 0.0, prog_hi = 0.0;
    long n_odb = 0, n_rct = 0;
    long n_odb_t = 0, n_odb_c = 0, n_rct_t = 0, n_rct_c = 0;
    double weight = 0.0;  // n_odb / total ODB size
};

// Assignment of every subject to a stratum. assignment[i] indexes strata for
// the i-th subject of the dataset the plan was built from. Weights are the
// ODB shares and sum to 1 whenever the ODB is nonempty.
struct stratification_plan {
    int k_requested = 0;
    bool composite = false;
    std::vector<stratum_info> strata;
    std::vector<int> assignment;
};

// Equal-width bin number (1-based) of a score under the ((k-1)/K, k/K]
// convention: a score equal to an interior edge lands in the lower interval,
// decided by comparisons against the edge doubles j/k rather than arithmetic
// on the score.
int bin_of_score(double e, int k);

// Equal-width propensity bins ((k-1)/K, k/K] for k = 1..K; a score of
// exactly 0 cannot occur (scores are validated into (0,1)) but the first
// interval is closed below anyway. Every subject must carry a propensity
// score. Empty bins are kept with weight 0.
stratification_plan make_equal_width_strata(const dataset& data, int k);

// Merge every stratum whose pooled (ODB + RCT) treated or control count is
// below min_arm into its nearest stratum with any members, ties toward the
// lower index, repeating until all surviving strata satisfy the floor or
// only one stratum remains. Idempotent. Composite plans prefer same-parent
// neighbors by construction of the linear order.
stratification_plan merge_sparse_strata(const dataset& data, const stratification_plan& plan,
                                        long min_arm);

// Subdivide each propensity stratum into up to `bins` equal-depth intervals
// of the prognostic score, edges taken from the ODB members of that stratum;
// tied edges collapse and empty sub-strata are dropped. Every subject needs
// a prognostic score.
stratification_plan sub_stratify_prognostic(const dataset& data,
                                            const stratification_plan& plan, int bins);

// Serialization used by the CLI (JSON-compatible plain text handled there);
// equality helper for tests.
bool same_assignment(const stratification_plan& a, const stratification_plan& b);

}  // namespace spikestrat
