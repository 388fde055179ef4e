#pragma once

#include <cmath>
#include <string>
#include <tuple>
#include <utility>

#include "pmstab/errors.hpp"

namespace pmstab {

// Upper bound of the Cox-Snell R^2 for a binary outcome with overall risk phi:
// 1 - (phi^phi (1-phi)^(1-phi))^2.
inline double max_cox_snell_r2(double phi) {
    if (!(phi > 0.0 && phi < 1.0)) throw DomainError("max_cox_snell_r2: phi must be in (0,1)");
    const double ll0 = phi * std::log(phi) + (1.0 - phi) * std::log(1.0 - phi);
    return 1.0 - std::exp(2.0 * ll0);
}

// Minimum-sample-size inputs: number of candidate predictor parameters,
// anticipated overall risk and Cox-Snell R^2, plus the three tuning targets
// (uniform shrinkage >= 0.9 and 0.05 margins are the conventional defaults).
struct MinSampleSpec {
    int p_params = 0;
    double overall_risk = 0.0;
    double r2_cs = 0.0;
    double shrinkage = 0.9;
    double margin_risk = 0.05;
    double optimism = 0.05;

    void validate() const {
        if (p_params < 1) throw DomainError("minss: p_params must be >= 1");
        if (!(overall_risk > 0.0 && overall_risk < 1.0)) throw DomainError("minss: overall_risk must be in (0,1)");
        if (!(shrinkage > 0.0 && shrinkage < 1.0)) throw DomainError("minss: shrinkage must be in (0,1)");
        if (!(margin_risk > 0.0)) throw DomainError("minss: margin_risk must be > 0");
        if (!(optimism > 0.0)) throw DomainError("minss: optimism must be > 0");
        if (!(r2_cs > 0.0)) throw DomainError("minss: r2_cs must be > 0");
        if (!(r2_cs < max_cox_snell_r2(overall_risk))) {
            throw DomainError("minss: r2_cs exceeds its upper bound at this overall risk");
        }
    }
};

struct MinSampleResult {
    long long n1 = 0; // precise overall risk
    long long n2 = 0; // small overfitting (uniform shrinkage target)
    long long n3 = 0; // small optimism in apparent fit
    long long n_final = 0;
    long long events = 0;
    double epp = 0.0;        // events per candidate parameter
    double s_required = 0.0; // shrinkage implied by the optimism target
};

// Sample size for a +/- margin confidence interval around the overall risk:
// ceil((1.96/margin)^2 phi (1-phi)).
inline long long criterion_i(double phi, double margin) {
    if (!(phi > 0.0 && phi < 1.0)) throw DomainError("criterion_i: phi must be in (0,1)");
    if (!(margin > 0.0)) throw DomainError("criterion_i: margin must be > 0");
    const double z = 1.96 / margin;
    return static_cast<long long>(std::ceil(z * z * phi * (1.0 - phi)));
}

// Sample size for an expected uniform shrinkage of at least S:
// ceil(P / ((S-1) ln(1 - R2/S))).
inline long long criterion_ii(int p_params, double shrinkage, double r2) {
    if (p_params < 1) throw DomainError("criterion_ii: p_params must be >= 1");
    if (!(shrinkage > 0.0 && shrinkage < 1.0)) throw DomainError("criterion_ii: S must be in (0,1)");
    if (!(r2 > 0.0 && r2 < shrinkage)) {
        throw DomainError("criterion_ii: need 0 < r2 < S (the log is undefined otherwise)");
    }
    return static_cast<long long>(std::ceil(p_params / ((shrinkage - 1.0) * std::log(1.0 - r2 / shrinkage))));
}

// Shrinkage implied by a target optimism in the Nagelkerke R^2, fed back
// through criterion (ii).
inline std::pair<double, long long> criterion_iii(int p_params, double r2, double optimism, double phi) {
    if (!(optimism > 0.0)) throw DomainError("criterion_iii: optimism must be > 0");
    const double s_required = r2 / (r2 + optimism * max_cox_snell_r2(phi));
    return {s_required, criterion_ii(p_params, s_required, r2)};
}

inline MinSampleResult min_sample_size(const MinSampleSpec& spec) {
    spec.validate();
    MinSampleResult r;
    r.n1 = criterion_i(spec.overall_risk, spec.margin_risk);
    r.n2 = criterion_ii(spec.p_params, spec.shrinkage, spec.r2_cs);
    std::tie(r.s_required, r.n3) = criterion_iii(spec.p_params, spec.r2_cs, spec.optimism, spec.overall_risk);
    r.n_final = std::max({r.n1, r.n2, r.n3});
    r.events = static_cast<long long>(std::ceil(static_cast<double>(r.n_final) * spec.overall_risk));
    r.epp = static_cast<double>(r.events) / spec.p_params;
    return r;
}

} // namespace pmstab
