#pragma once

#include <cmath>
#include <string>

#include "pmstab/errors.hpp"

namespace pmstab::num {

// Bisection for a sign-changing function on [lo, hi]. Stops when |f(mid)| <= tol
// or the bracket width falls below tol. Deterministic; the result stays inside
// the initial bracket.
template <typename F>
double bisect_root(F&& f, double lo, double hi, double tol = 1e-10, int max_iter = 200) {
    if (!(tol > 0.0)) throw DomainError("bisect_root: tol must be > 0");
    if (lo > hi) std::swap(lo, hi);
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) {
        throw NoBracket("bisect_root: f(lo) and f(hi) have the same sign");
    }
    for (int it = 0; it < max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = f(mid);
        if (std::abs(fmid) <= tol || (hi - lo) <= tol) return mid;
        if ((fmid > 0.0) == (fhi > 0.0)) {
            hi = mid;
            fhi = fmid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    throw NoConvergence("bisect_root: no root to tolerance " + std::to_string(tol) + " after " +
                        std::to_string(max_iter) + " iterations");
}

} // namespace pmstab::num
