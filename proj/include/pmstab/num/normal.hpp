#pragma once

#include <cmath>

#include "pmstab/errors.hpp"

namespace pmstab::num {

inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / 1.4142135623730950488);
}

namespace detail {

// Acklam's rational approximation to the standard normal quantile,
// |relative error| < 1.15e-9 over (0,1).
inline double quantile_seed(double q) {
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (q < plow) {
        double u = std::sqrt(-2.0 * std::log(q));
        return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
               ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    if (q > 1.0 - plow) {
        double u = std::sqrt(-2.0 * std::log(1.0 - q));
        return -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
               ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    double u = q - 0.5;
    double r = u * u;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

} // namespace detail

// Inverse of normal_cdf; seeded by Acklam's approximation, polished with one
// Halley step against the erfc-based cdf.
inline double normal_quantile(double q) {
    if (!(q > 0.0 && q < 1.0)) throw DomainError("normal_quantile requires q in (0,1)");
    double x = detail::quantile_seed(q);
    const double e = normal_cdf(x) - q;
    const double pdf = std::exp(-0.5 * x * x) * 0.39894228040143267794;
    const double u = e / pdf;
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

inline double invlogit(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("logit requires p in (0,1)");
    return std::log(p / (1.0 - p));
}

} // namespace pmstab::num
