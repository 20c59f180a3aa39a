#include "spikestrat/auc.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "spikestrat/ksum.hpp"

namespace spikestrat {

double auc_score(std::span<const double> score, std::span<const int> label) {
    if (score.size() != label.size())
        throw std::invalid_argument("scores and labels differ in length");
    std::size_t n = score.size();
    long n_pos = 0;
    for (int l : label) {
        if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0 or 1");
        n_pos += l;
    }
    long n_neg = static_cast<long>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("AUC needs both classes present");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });

    // Midranks over tie groups; sum the positive-class ranks.
    ksum rank_pos;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && score[idx[j]] == score[idx[i]]) ++j;
        double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t)
            if (label[idx[t]] == 1) rank_pos += midrank;
        i = j;
    }
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_pos.value() - np * (np + 1.0) / 2.0) / (np * nn);
}

}  // namespace spikestrat
