#pragma once

#include <cmath>
#include <cstddef>

namespace spikestrat {

// Neumaier-compensated accumulator. Used wherever many same-sign or
// cancelling terms are folded (moment sums, replicate reductions) so results
// do not depend on accumulation granularity at the 1e-12 level.
class ksum {
public:
    ksum() = default;
    explicit ksum(double v) : sum_(v) {}

    ksum& operator+=(double v) {
        double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
        return *this;
    }

    ksum& operator+=(const ksum& other) {
        *this += other.sum_;
        *this += other.comp_;
        return *this;
    }

    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Mean of the first n accumulated values; 0 for n = 0.
inline double ksum_mean(const ksum& s, std::size_t n) {
    return n == 0 ? 0.0 : s.value() / static_cast<double>(n);
}

}  // namespace spikestrat
