#pragma once

#include <span>

namespace spikestrat {

// Area under the ROC curve via the Mann-Whitney statistic with midranks, so
// ties count one half. Labels must be 0/1 with both classes present.
double auc_score(std::span<const double> score, std::span<const int> label);

}  // namespace spikestrat
