#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmstab/core_model.hpp"
#include "pmstab/errors.hpp"
#include "pmstab/fisher_info.hpp"
#include "pmstab/num/normal.hpp"
#include "pmstab/summary.hpp"

namespace pmstab {

// z for the interval level; 0.95 is the working default throughout.
inline double interval_z(double level = 0.95) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("interval level must be in (0,1)");
    return num::normal_quantile(0.5 + level / 2.0);
}

struct PrecisionRecord {
    std::size_t row_index = 0;
    double true_risk = 0.0;
    double var_logit = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double width = 0.0;
};

// Wald interval on the logit scale, back-transformed:
// invlogit(logit(p) +/- z sqrt(v)). v = 0 collapses to (p, p).
inline std::pair<double, double> uncertainty_interval(double p, double v, double level = 0.95) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("uncertainty_interval: p must be in (0,1)");
    if (!(v >= 0.0)) throw DomainError("uncertainty_interval: v must be >= 0");
    if (v == 0.0) return {p, p};
    const double h = interval_z(level) * std::sqrt(v);
    const double mu = num::logit(p);
    return {num::invlogit(mu - h), num::invlogit(mu + h)};
}

inline double interval_width(double p, double v, double level = 0.95) {
    const auto [lo, hi] = uncertainty_interval(p, v, level);
    return hi - lo;
}

// The unique logit-variance whose interval at risk p has the requested width.
// Width is continuous and strictly increasing in v, from 0 toward 1, so plain
// bisection on v applies.
inline double width_to_variance(double p, double max_width, double level = 0.95) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("width_to_variance: p must be in (0,1)");
    if (!(max_width > 0.0)) throw DomainError("width_to_variance: width must be > 0");
    if (max_width >= 1.0) {
        throw Unachievable("width_to_variance: interval width cannot reach " + csv::format_double(max_width));
    }
    double hi = 1.0;
    while (interval_width(p, hi, level) < max_width) {
        hi *= 2.0;
        if (hi > 1e12) {
            throw Unachievable("width_to_variance: width " + csv::format_double(max_width) +
                               " not reachable at p=" + csv::format_double(p));
        }
    }
    double lo = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (interval_width(p, mid, level) < max_width) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-15 * hi) break;
    }
    return 0.5 * (lo + hi);
}

// One entry of the variance-target ladder for the required-n calculation:
// rows are assigned to the band whose risk grid point is nearest their own
// true risk, and inherit its variance ceiling.
struct BandTarget {
    double risk = 0.0;
    double max_width = 0.0;
    double max_var = 0.0;
};

inline BandTarget make_band(double risk, double max_width, double level = 0.95) {
    return BandTarget{risk, max_width, width_to_variance(risk, max_width, level)};
}

struct OptionAResult {
    std::vector<PrecisionRecord> records;
    Summary width_summary;
};

// Expected per-individual uncertainty at development sample size n: every row
// gets its model risk, logit variance and interval.
inline OptionAResult option_a(const CoreModel& m, const Dataset& ds, const UnitInformation& info,
                              std::size_t n, double level = 0.95) {
    if (n < 1) throw DomainError("option_a: n must be >= 1");
    const num::SymMatrix inv = num::invert_spd(info.matrix);
    const double z = interval_z(level);
    OptionAResult out;
    out.records.resize(ds.n());
    std::vector<double> widths(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto xt = detail::with_intercept(ds.row(i));
        const double v = num::quad_form(inv, xt) / static_cast<double>(n);
        const double p = risk(m, ds.row(i));
        const double mu = num::logit(p);
        const double h = z * std::sqrt(v);
        PrecisionRecord rec;
        rec.row_index = i;
        rec.true_risk = p;
        rec.var_logit = v;
        rec.lower = num::invlogit(mu - h);
        rec.upper = num::invlogit(mu + h);
        rec.width = rec.upper - rec.lower;
        widths[i] = rec.width;
        out.records[i] = rec;
    }
    out.width_summary = summarize(widths);
    return out;
}

struct OptionBResult {
    std::vector<long long> per_row_n;
    std::vector<std::size_t> band_of_row;
    long long required_n = 0;
};

namespace detail {

// Ceiling with a relative slack of 1e-9, so a ratio that is an integer up to
// float noise (leverage computed by one route, the ceiling by another) does
// not round up a whole participant.
inline long long required_count(double ratio) {
    const long long n = static_cast<long long>(std::ceil(ratio * (1.0 - 1e-9)));
    return n < 1 ? 1 : n;
}

} // namespace detail

// Required n per individual (Fisher decomposition solved for n), against a
// ladder of variance targets; the overall requirement is the per-row maximum.
// Ties between equally near grid points go to the lower band.
inline OptionBResult option_b(const CoreModel& m, const Dataset& ds, const UnitInformation& info,
                              const std::vector<BandTarget>& bands) {
    if (bands.empty()) throw DomainError("option_b: need at least one band");
    for (std::size_t b = 1; b < bands.size(); ++b) {
        if (!(bands[b].risk > bands[b - 1].risk)) {
            throw DomainError("option_b: band risks must be strictly increasing");
        }
    }
    const num::SymMatrix inv = num::invert_spd(info.matrix);
    OptionBResult out;
    out.per_row_n.resize(ds.n());
    out.band_of_row.resize(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const double p = risk(m, ds.row(i));
        std::size_t best = 0;
        for (std::size_t b = 1; b < bands.size(); ++b) {
            if (std::abs(bands[b].risk - p) < std::abs(bands[best].risk - p)) best = b;
        }
        const auto xt = detail::with_intercept(ds.row(i));
        const double leverage = num::quad_form(inv, xt);
        out.per_row_n[i] = detail::required_count(leverage / bands[best].max_var);
        out.band_of_row[i] = best;
        out.required_n = std::max(out.required_n, out.per_row_n[i]);
    }
    return out;
}

// Uniform-width variant: every row's variance target is taken at its own true
// risk, i.e. the limit of an arbitrarily fine band grid.
inline OptionBResult option_b_uniform_width(const CoreModel& m, const Dataset& ds,
                                            const UnitInformation& info, double max_width,
                                            double level = 0.95) {
    const num::SymMatrix inv = num::invert_spd(info.matrix);
    OptionBResult out;
    out.per_row_n.resize(ds.n());
    out.band_of_row.assign(ds.n(), 0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const double p = risk(m, ds.row(i));
        const double v = width_to_variance(p, max_width, level);
        const auto xt = detail::with_intercept(ds.row(i));
        const double leverage = num::quad_form(inv, xt);
        out.per_row_n[i] = detail::required_count(leverage / v);
        out.required_n = std::max(out.required_n, out.per_row_n[i]);
    }
    return out;
}

inline std::string to_csv(const std::vector<PrecisionRecord>& records) {
    std::string out = "row_index,true_risk,var_logit,lower,upper,width\n";
    for (const auto& r : records) {
        out += std::to_string(r.row_index) + ',' + csv::format_double(r.true_risk) + ',' +
               csv::format_double(r.var_logit) + ',' + csv::format_double(r.lower) + ',' +
               csv::format_double(r.upper) + ',' + csv::format_double(r.width) + '\n';
    }
    return out;
}

} // namespace pmstab
