#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pmstab/errors.hpp"
#include "pmstab/num/normal.hpp"
#include "pmstab/num/roots.hpp"
#include "pmstab/num/summation.hpp"
#include "pmstab/population.hpp"

namespace pmstab {

// The assumed true logistic model: logit(p) = alpha + delta * (beta . x).
// delta rescales the whole beta vector, so betas can be given as relative
// weights; effect direction lives in the signs of beta (delta stays >= 0).
struct CoreModel {
    double alpha = 0.0;
    double delta = 1.0;
    std::vector<double> betas;
    std::vector<std::string> predictor_names;
};

struct CalibrationTarget {
    double overall_risk = 0.0;
    double c_statistic = 0.0;
    double tol_risk = 1e-3;
    double tol_c = 1e-3;

    void validate() const {
        if (!(overall_risk > 0.0 && overall_risk < 1.0)) throw DomainError("overall_risk must be in (0,1)");
        if (!(c_statistic > 0.5 && c_statistic < 1.0)) throw DomainError("c_statistic must be in (0.5,1)");
        if (!(tol_risk > 0.0 && tol_c > 0.0)) throw DomainError("calibration tolerances must be > 0");
    }
};

inline double linear_predictor(const CoreModel& m, std::span<const double> x) {
    if (x.size() != m.betas.size()) {
        throw DimensionMismatch("linear_predictor: row has " + std::to_string(x.size()) +
                                " predictors, model has " + std::to_string(m.betas.size()));
    }
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += m.betas[k] * x[k];
    return m.alpha + m.delta * s;
}

inline double risk(const CoreModel& m, std::span<const double> x) {
    return num::invlogit(linear_predictor(m, x));
}

inline double mean_risk(const CoreModel& m, const Dataset& ds) {
    if (ds.n() == 0) throw EmptyInput("mean_risk over empty dataset");
    num::CompensatedSum acc;
    for (std::size_t i = 0; i < ds.n(); ++i) acc.add(risk(m, ds.row(i)));
    return acc.value() / static_cast<double>(ds.n());
}

struct CStatistic {
    double value = 0.5;
    bool degenerate = false; // all linear predictors equal; 0.5 by convention
};

namespace detail {

// Model-implied concordance from per-row (score, risk) pairs:
//   C = sum_{i != j} p_i (1-p_j) [ 1{s_i > s_j} + 0.5 * 1{s_i == s_j} ]
//     / sum_{i != j} p_i (1-p_j)
// computed in one ascending sweep over score groups; identical to the O(N^2)
// pair sum up to rounding.
inline CStatistic concordance(std::vector<std::pair<double, double>>& score_risk) {
    const std::size_t n = score_risk.size();
    if (n < 2) throw DomainError("c-statistic needs >= 2 rows");
    std::sort(score_risk.begin(), score_risk.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (score_risk.front().first == score_risk.back().first) return {0.5, true};

    num::CompensatedSum sum_p, sum_q, sum_pq;
    for (const auto& [s, p] : score_risk) {
        sum_p.add(p);
        sum_q.add(1.0 - p);
        sum_pq.add(p * (1.0 - p));
    }
    const double denom = sum_p.value() * sum_q.value() - sum_pq.value();

    num::CompensatedSum numer;
    double q_below = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        num::CompensatedSum gp, gq, gpq;
        while (j < n && score_risk[j].first == score_risk[i].first) {
            const double p = score_risk[j].second;
            gp.add(p);
            gq.add(1.0 - p);
            gpq.add(p * (1.0 - p));
            ++j;
        }
        numer.add(gp.value() * q_below);
        numer.add(0.5 * (gp.value() * gq.value() - gpq.value()));
        q_below += gq.value();
        i = j;
    }
    return {numer.value() / denom, false};
}

} // namespace detail

inline CStatistic model_c_statistic_checked(const CoreModel& m, const Dataset& ds) {
    std::vector<std::pair<double, double>> sr(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const double lp = linear_predictor(m, ds.row(i));
        sr[i] = {lp, num::invlogit(lp)};
    }
    return detail::concordance(sr);
}

inline double model_c_statistic(const CoreModel& m, const Dataset& ds) {
    return model_c_statistic_checked(m, ds).value;
}

// Expected Cox-Snell R^2 of the model against the null (intercept-only) model
// with the same overall risk, using per-row expected log-likelihoods.
inline double cox_snell_r2(const CoreModel& m, const Dataset& ds) {
    if (ds.n() == 0) throw EmptyInput("cox_snell_r2 over empty dataset");
    num::CompensatedSum ll, mean_p;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const double p = risk(m, ds.row(i));
        if (p <= 0.0 || p >= 1.0) throw DegenerateRisks("risk of 0 or 1 at row " + std::to_string(i));
        ll.add(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
        mean_p.add(p);
    }
    const double n = static_cast<double>(ds.n());
    const double phi = mean_p.value() / n;
    if (!(phi > 0.0 && phi < 1.0)) throw DomainError("mean risk outside (0,1)");
    const double ll1 = ll.value() / n;
    const double ll0 = phi * std::log(phi) + (1.0 - phi) * std::log(1.0 - phi);
    return 1.0 - std::exp(2.0 * (ll0 - ll1));
}

namespace detail {

// Calibration work space: the beta-score of each row is fixed across the
// search, so it is computed and sorted once.
struct CalibrationScores {
    std::vector<double> sorted_scores;
    double score_min = 0.0, score_max = 0.0;

    CalibrationScores(const Dataset& ds, const std::vector<double>& betas) {
        sorted_scores.resize(ds.n());
        for (std::size_t i = 0; i < ds.n(); ++i) {
            const auto row = ds.row(i);
            if (row.size() != betas.size()) throw DimensionMismatch("calibrate: betas/dataset width");
            double s = 0.0;
            for (std::size_t k = 0; k < betas.size(); ++k) s += betas[k] * row[k];
            sorted_scores[i] = s;
        }
        std::sort(sorted_scores.begin(), sorted_scores.end());
        score_min = sorted_scores.front();
        score_max = sorted_scores.back();
    }

    double mean_risk(double alpha, double delta) const {
        num::CompensatedSum acc;
        for (double s : sorted_scores) acc.add(num::invlogit(alpha + delta * s));
        return acc.value() / static_cast<double>(sorted_scores.size());
    }

    // Solve for the intercept giving the target overall risk at this delta;
    // the mean risk is strictly increasing in alpha.
    double alpha_for_risk(double delta, double phi, double tol) const {
        double lo = num::logit(phi) - delta * std::max(std::abs(score_min), std::abs(score_max)) - 1.0;
        double hi = num::logit(phi) + delta * std::max(std::abs(score_min), std::abs(score_max)) + 1.0;
        auto f = [&](double a) { return mean_risk(a, delta) - phi; };
        return num::bisect_root(f, lo, hi, tol, 400);
    }

    double c_at(double alpha, double delta) const {
        const std::size_t n = sorted_scores.size();
        std::vector<std::pair<double, double>> sr(n);
        for (std::size_t i = 0; i < n; ++i) {
            sr[i] = {sorted_scores[i], num::invlogit(alpha + delta * sorted_scores[i])};
        }
        return concordance(sr).value;
    }
};

} // namespace detail

// Iterative bisection calibration: an outer bisection on the scale factor
// delta targets the C-statistic (non-decreasing in delta, since rescaling
// preserves the score ordering while spreading the risks); for every trial
// delta an inner bisection on alpha pins the overall risk first.
inline CoreModel calibrate(const Dataset& ds, const std::vector<double>& betas,
                           const CalibrationTarget& target,
                           const std::vector<std::string>& predictor_names = {}) {
    target.validate();
    if (ds.n() < 2) throw DomainError("calibrate needs >= 2 rows");
    if (std::all_of(betas.begin(), betas.end(), [](double b) { return b == 0.0; })) {
        throw AllZeroWeights("calibrate: all relative weights are zero");
    }

    detail::CalibrationScores scores(ds, betas);
    if (scores.score_min == scores.score_max) {
        throw DegenerateRisks("calibrate: beta-scores identical for every row");
    }
    const double inner_tol = target.tol_risk * 0.1;

    auto c_of_delta = [&](double delta) {
        const double alpha = scores.alpha_for_risk(delta, target.overall_risk, inner_tol);
        return std::pair<double, double>{scores.c_at(alpha, delta), alpha};
    };

    double lo = 0.0;
    auto [c_lo, alpha_lo] = c_of_delta(lo);
    if (std::abs(c_lo - target.c_statistic) <= target.tol_c) {
        return CoreModel{alpha_lo, lo, betas, predictor_names};
    }
    double hi = 16.0;
    auto [c_hi, alpha_hi] = c_of_delta(hi);
    while (c_hi < target.c_statistic - target.tol_c) {
        if (hi >= 1024.0) {
            throw DeltaUnreachable("calibrate: C only reaches " + csv::format_double(c_hi) +
                                   " at delta=" + csv::format_double(hi) +
                                   "; too little predictor variation for C=" +
                                   csv::format_double(target.c_statistic));
        }
        hi *= 2.0;
        std::tie(c_hi, alpha_hi) = c_of_delta(hi);
    }
    if (std::abs(c_hi - target.c_statistic) <= target.tol_c) {
        return CoreModel{alpha_hi, hi, betas, predictor_names};
    }

    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        auto [c_mid, alpha_mid] = c_of_delta(mid);
        if (std::abs(c_mid - target.c_statistic) <= target.tol_c) {
            return CoreModel{alpha_mid, mid, betas, predictor_names};
        }
        if (c_mid < target.c_statistic) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    throw NoConvergence("calibrate: 200 outer iterations without hitting the C target");
}

} // namespace pmstab
