#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "pmstab/errors.hpp"

namespace pmstab::num {

// Neumaier-compensated accumulator. Order-sensitive at the last ulp like any
// float sum, but immune to the catastrophic cancellation of a naive loop.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
        ++count_;
    }

    double value() const { return sum_ + comp_; }
    std::size_t count() const { return count_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
    std::size_t count_ = 0;
};

inline double sum_compensated(std::span<const double> xs) {
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

inline double mean_compensated(std::span<const double> xs) {
    if (xs.empty()) throw EmptyInput("mean_compensated over empty sequence");
    return sum_compensated(xs) / static_cast<double>(xs.size());
}

} // namespace pmstab::num
