#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "pmstab/errors.hpp"
#include "pmstab/num/summation.hpp"

namespace pmstab {

struct Summary {
    double mean = 0.0;
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
};

// Order statistics; for an even count the median is the lower-middle element.
inline Summary summarize(std::span<const double> values) {
    if (values.empty()) throw EmptyInput("summarize over empty sequence");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    Summary s;
    s.mean = num::mean_compensated(values);
    s.min = sorted.front();
    s.max = sorted.back();
    s.median = sorted[(sorted.size() - 1) / 2];
    return s;
}

} // namespace pmstab
