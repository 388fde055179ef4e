#pragma once

#include "pmstab/errors.hpp"

namespace pmstab {

// Utilities of the four act/state pathways for a binary decision. An interior
// risk threshold exists only when acting is preferred in the present state
// (u1 > u3) and dispreferred in the absent state (u4 > u2).
struct UtilitySpec {
    double act_present = 0.0;    // u1
    double act_absent = 0.0;     // u2
    double no_act_present = 0.0; // u3
    double no_act_absent = 0.0;  // u4

    void validate() const {
        if (!(act_present > no_act_present && no_act_absent > act_absent)) {
            throw NoThreshold("need u1 > u3 and u4 > u2 for an interior risk threshold");
        }
    }
};

// Indifference risk: (1 + (u1-u3)/(u4-u2))^-1. Depends only on the two
// utility differences, so it is invariant to shifting or positively rescaling
// all four utilities.
inline double risk_threshold(const UtilitySpec& u) {
    u.validate();
    return 1.0 / (1.0 + (u.act_present - u.no_act_present) / (u.no_act_absent - u.act_absent));
}

inline double expected_utility(double p, const UtilitySpec& u, bool act) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("expected_utility: p must be in [0,1]");
    return act ? p * u.act_present + (1.0 - p) * u.act_absent
               : p * u.no_act_present + (1.0 - p) * u.no_act_absent;
}

} // namespace pmstab
