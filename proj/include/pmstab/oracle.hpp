#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pmstab/core_model.hpp"
#include "pmstab/errors.hpp"
#include "pmstab/fisher_info.hpp"
#include "pmstab/num/rng.hpp"
#include "pmstab/num/summation.hpp"
#include "pmstab/num/sym_matrix.hpp"
#include "pmstab/population.hpp"

namespace pmstab {

struct FitResult {
    std::vector<double> betas; // intercept first
    num::SymMatrix vcov;       // inverse observed information at convergence
    bool converged = false;
    int iterations = 0;
    double loglik = 0.0;
};

namespace detail {

struct DesignMatrix {
    std::size_t n = 0;
    int p1 = 0;                // columns incl. intercept
    std::vector<double> data;  // row-major, intercept first

    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * static_cast<std::size_t>(p1), static_cast<std::size_t>(p1)};
    }
};

inline DesignMatrix design_from(const Dataset& ds) {
    DesignMatrix x;
    x.n = ds.n();
    x.p1 = ds.n_columns() + 1;
    x.data.resize(x.n * static_cast<std::size_t>(x.p1));
    for (std::size_t i = 0; i < x.n; ++i) {
        double* out = x.data.data() + i * static_cast<std::size_t>(x.p1);
        out[0] = 1.0;
        const auto row = ds.row(i);
        for (int k = 0; k + 1 < x.p1; ++k) out[k + 1] = row[static_cast<std::size_t>(k)];
    }
    return x;
}

inline double log1pexp(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Newton / iteratively reweighted least squares from beta = 0. Declared
// converged once the score's max-norm is <= 1e-8; a coefficient running past
// |20| while the likelihood still improves is flagged as quasi-complete
// separation rather than ground out to the iteration cap.
inline FitResult fit_logistic_design(const DesignMatrix& x, std::span<const int> y, int max_iter = 50) {
    if (y.size() != x.n) throw DimensionMismatch("fit_logistic: outcome length != row count");
    if (x.n == 0) throw EmptyInput("fit_logistic: empty design");
    {
        const int first = y[0];
        bool all_same = true;
        for (int yi : y) {
            if (yi != first) {
                all_same = false;
                break;
            }
        }
        if (all_same) throw AllSameOutcome("fit_logistic: outcome is constant");
    }

    const int p1 = x.p1;
    std::vector<double> beta(static_cast<std::size_t>(p1), 0.0);
    std::vector<double> grad(static_cast<std::size_t>(p1));
    double prev_ll = -std::numeric_limits<double>::infinity();
    FitResult result;

    for (int it = 1; it <= max_iter; ++it) {
        num::SymMatrix hess(p1);
        std::vector<num::CompensatedSum> gacc(static_cast<std::size_t>(p1));
        std::vector<double> hacc(static_cast<std::size_t>(p1) * p1, 0.0);
        num::CompensatedSum ll;
        for (std::size_t i = 0; i < x.n; ++i) {
            const auto xi = x.row(i);
            double lp = 0.0;
            for (int k = 0; k < p1; ++k) lp += beta[static_cast<std::size_t>(k)] * xi[static_cast<std::size_t>(k)];
            const double p = num::invlogit(lp);
            const double w = p * (1.0 - p);
            const double r = static_cast<double>(y[i]) - p;
            ll.add(static_cast<double>(y[i]) * lp - log1pexp(lp));
            for (int a = 0; a < p1; ++a) {
                gacc[static_cast<std::size_t>(a)].add(r * xi[static_cast<std::size_t>(a)]);
                for (int b = a; b < p1; ++b) {
                    hacc[static_cast<std::size_t>(a) * p1 + b] +=
                        w * xi[static_cast<std::size_t>(a)] * xi[static_cast<std::size_t>(b)];
                }
            }
        }
        for (int a = 0; a < p1; ++a) {
            grad[static_cast<std::size_t>(a)] = gacc[static_cast<std::size_t>(a)].value();
            for (int b = a; b < p1; ++b) hess.set(a, b, hacc[static_cast<std::size_t>(a) * p1 + b]);
        }
        const double cur_ll = ll.value();
        double gmax = 0.0;
        for (double g : grad) gmax = std::max(gmax, std::abs(g));

        result.iterations = it;
        result.loglik = cur_ll;
        if (gmax <= 1e-8) {
            result.converged = true;
            result.betas = beta;
            result.vcov = num::invert_spd(hess);
            return result;
        }

        const bool improving = cur_ll > prev_ll;
        for (double b : beta) {
            if (std::abs(b) > 20.0 && improving) {
                throw Separation("fit_logistic: coefficient beyond |20| with likelihood still improving");
            }
        }
        if (std::abs(cur_ll - prev_ll) <= 1e-10 && it > 1) {
            // Stalled likelihood with a non-negligible score: report honestly.
            result.converged = gmax <= 1e-8;
            result.betas = beta;
            result.vcov = num::invert_spd(hess);
            return result;
        }
        prev_ll = cur_ll;

        num::CholeskyFactor chol(hess);
        std::vector<double> step = grad;
        chol.solve_in_place(step);
        for (int k = 0; k < p1; ++k) beta[static_cast<std::size_t>(k)] += step[static_cast<std::size_t>(k)];
    }
    throw NoConvergence("fit_logistic: no convergence in " + std::to_string(max_iter) + " iterations");
}

// Type-7 (linear interpolation) quantile of a sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    const double h = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

} // namespace detail

inline FitResult fit_logistic(const Dataset& ds, std::span<const int> y) {
    return detail::fit_logistic_design(detail::design_from(ds), y);
}

struct StabilityResult {
    // Per evaluation row, across successful replicates.
    std::vector<double> lower;    // 2.5% percentile of predicted risk
    std::vector<double> upper;    // 97.5% percentile of predicted risk
    std::vector<double> logit_sd; // SD of predicted logits
    int reps_requested = 0;
    int reps_used = 0;
    int reps_failed = 0; // separation / constant outcome / non-convergence
};

// Replicate the development process: each rep draws n rows with replacement
// from the population, generates outcomes from the core model, refits by
// maximum likelihood and predicts every evaluation row. Rep r draws from the
// sub-stream "oracle:<r>", so the result is independent of scheduling.
inline StabilityResult empirical_stability(const CoreModel& m, const Dataset& ds, std::size_t n,
                                           int reps, const num::RngStream& rng,
                                           const Dataset* eval = nullptr) {
    if (reps < 2) throw DomainError("empirical_stability: reps must be >= 2");
    if (n < 1) throw DomainError("empirical_stability: n must be >= 1");
    const Dataset& ev = eval ? *eval : ds;
    const auto eval_design = detail::design_from(ev);
    const int p1 = eval_design.p1;

    StabilityResult out;
    out.reps_requested = reps;
    std::vector<std::vector<double>> logits(ev.n()); // per eval row, per successful rep

    detail::DesignMatrix train;
    train.p1 = ds.n_columns() + 1;
    train.n = n;
    train.data.resize(n * static_cast<std::size_t>(train.p1));
    std::vector<int> y(n);

    for (int r = 0; r < reps; ++r) {
        auto stream = rng.derive("oracle:" + std::to_string(r));
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t src = static_cast<std::size_t>(stream.next_index(ds.n()));
            double* row = train.data.data() + i * static_cast<std::size_t>(train.p1);
            row[0] = 1.0;
            const auto srow = ds.row(src);
            for (int k = 0; k + 1 < train.p1; ++k) row[k + 1] = srow[static_cast<std::size_t>(k)];
            y[i] = stream.next_bernoulli(risk(m, srow)) ? 1 : 0;
        }
        try {
            const FitResult fit = detail::fit_logistic_design(train, y);
            for (std::size_t i = 0; i < ev.n(); ++i) {
                const auto xi = eval_design.row(i);
                double lp = 0.0;
                for (int k = 0; k < p1; ++k) lp += fit.betas[static_cast<std::size_t>(k)] * xi[static_cast<std::size_t>(k)];
                logits[i].push_back(lp);
            }
            ++out.reps_used;
        } catch (const Separation&) {
            ++out.reps_failed;
        } catch (const AllSameOutcome&) {
            ++out.reps_failed;
        } catch (const NoConvergence&) {
            ++out.reps_failed;
        }
    }
    if (out.reps_failed > reps / 5) {
        throw TooFewSuccessfulReps(std::to_string(out.reps_failed) + " of " + std::to_string(reps) +
                                   " replicates failed");
    }

    out.lower.resize(ev.n());
    out.upper.resize(ev.n());
    out.logit_sd.resize(ev.n());
    for (std::size_t i = 0; i < ev.n(); ++i) {
        auto& v = logits[i];
        num::CompensatedSum mean_acc;
        for (double lp : v) mean_acc.add(lp);
        const double mean = mean_acc.value() / static_cast<double>(v.size());
        num::CompensatedSum ss;
        for (double lp : v) ss.add((lp - mean) * (lp - mean));
        out.logit_sd[i] = std::sqrt(ss.value() / static_cast<double>(v.size() - 1));
        std::sort(v.begin(), v.end());
        out.lower[i] = num::invlogit(detail::quantile_sorted(v, 0.025));
        out.upper[i] = num::invlogit(detail::quantile_sorted(v, 0.975));
    }
    return out;
}

struct RatioTable {
    std::vector<double> ratio; // empirical SD / closed-form SE, per row
    double mean_abs_log_ratio = 0.0;
    double max_abs_log_ratio = 0.0;
};

inline RatioTable compare_to_closed_form(std::span<const double> empirical_sd,
                                         std::span<const double> closed_form_se) {
    if (empirical_sd.size() != closed_form_se.size()) {
        throw DimensionMismatch("compare_to_closed_form: length mismatch");
    }
    RatioTable t;
    t.ratio.resize(empirical_sd.size());
    num::CompensatedSum acc;
    for (std::size_t i = 0; i < empirical_sd.size(); ++i) {
        t.ratio[i] = empirical_sd[i] / closed_form_se[i];
        const double alr = std::abs(std::log(t.ratio[i]));
        acc.add(alr);
        t.max_abs_log_ratio = std::max(t.max_abs_log_ratio, alr);
    }
    t.mean_abs_log_ratio = empirical_sd.empty() ? 0.0 : acc.value() / static_cast<double>(empirical_sd.size());
    return t;
}

inline std::string to_csv(const RatioTable& t, std::span<const double> empirical_sd,
                          std::span<const double> closed_form_se) {
    std::string out = "row_index,empirical_sd,closed_form_se,ratio\n";
    for (std::size_t i = 0; i < t.ratio.size(); ++i) {
        out += std::to_string(i) + ',' + csv::format_double(empirical_sd[i]) + ',' +
               csv::format_double(closed_form_se[i]) + ',' + csv::format_double(t.ratio[i]) + '\n';
    }
    return out;
}

} // namespace pmstab
