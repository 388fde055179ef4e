#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pmstab/errors.hpp"
#include "pmstab/num/normal.hpp"
#include "pmstab/num/rng.hpp"
#include "pmstab/num/summation.hpp"
#include "pmstab/population.hpp"
#include "pmstab/precision.hpp"
#include "pmstab/summary.hpp"

namespace pmstab {

// Mass of the logit-normal uncertainty distribution sitting on the wrong side
// of the decision threshold. Closed form: with Z ~ N(logit p, v) this is a
// single normal tail, capped at 0.5 and equal to 0.5 only when p == t.
inline double misclassification_prob(double p, double v, double t) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("misclassification_prob: p must be in (0,1)");
    if (!(t > 0.0 && t < 1.0)) throw DomainError("misclassification_prob: t must be in (0,1)");
    if (!(v >= 0.0)) throw DomainError("misclassification_prob: v must be >= 0");
    if (p == t) return 0.5;
    if (v == 0.0) return 0.0;
    const double z = (num::logit(t) - num::logit(p)) / std::sqrt(v);
    return p > t ? num::normal_cdf(z) : num::normal_cdf(-z);
}

// Mean absolute prediction error by sampling the uncertainty distribution,
// as defined: draws from N(logit p, v), back-transformed, compared to p.
inline double mape(double p, double v, int draws, num::RngStream rng) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("mape: p must be in (0,1)");
    if (!(v >= 0.0)) throw DomainError("mape: v must be >= 0");
    if (draws < 1) throw DomainError("mape: draws must be >= 1");
    if (v == 0.0) return 0.0;
    const double s = std::sqrt(v);
    const double mu = num::logit(p);
    num::CompensatedSum acc;
    for (int k = 0; k < draws; ++k) {
        acc.add(std::abs(num::invlogit(mu + s * rng.next_normal()) - p));
    }
    return acc.value() / draws;
}

struct InstabilityRecord {
    std::size_t row_index = 0;
    double true_risk = 0.0;
    std::optional<double> misclass_prob;
    double mape = 0.0;
};

// Per-row instability metrics for an Option A run. MAPE uses the sub-stream
// "mape:<row-index>", so values do not depend on evaluation order. Thresholds
// may vary per row (per-subgroup decision thresholds).
inline std::vector<InstabilityRecord> compute_instability(const std::vector<PrecisionRecord>& records,
                                                          const std::vector<std::optional<double>>& thresholds,
                                                          int draws, const num::RngStream& rng) {
    if (thresholds.size() != records.size()) {
        throw DimensionMismatch("compute_instability: one threshold slot per record required");
    }
    std::vector<InstabilityRecord> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        InstabilityRecord rec;
        rec.row_index = r.row_index;
        rec.true_risk = r.true_risk;
        if (thresholds[i]) rec.misclass_prob = misclassification_prob(r.true_risk, r.var_logit, *thresholds[i]);
        rec.mape = mape(r.true_risk, r.var_logit, draws, rng.derive("mape:" + std::to_string(r.row_index)));
        out[i] = rec;
    }
    return out;
}

inline std::vector<InstabilityRecord> compute_instability(const std::vector<PrecisionRecord>& records,
                                                          std::optional<double> threshold,
                                                          int draws, const num::RngStream& rng) {
    return compute_instability(records, std::vector<std::optional<double>>(records.size(), threshold),
                               draws, rng);
}

struct SummaryTable {
    std::string group_label;
    std::size_t group_n = 0;
    Summary width;
    Summary mape;
    std::optional<Summary> misclass;
};

// Within-level summaries for one grouping variable plus an "Overall" row.
// The grouping variable may sit outside the core model; it only has to be a
// binary or categorical variable of the dataset.
inline std::vector<SummaryTable> group_summary(const std::vector<PrecisionRecord>& precision,
                                               const std::vector<InstabilityRecord>& instability,
                                               const Dataset& ds, const std::string& group_var) {
    if (precision.size() != instability.size() || precision.empty()) {
        throw DimensionMismatch("group_summary: record lists must be non-empty and aligned");
    }
    const int vi = ds.variable_index(group_var);
    if (vi < 0) throw UnknownVariable("group_summary: no variable named '" + group_var + "'");
    const auto& var = ds.variables()[static_cast<std::size_t>(vi)];
    if (var.kind == VarKind::continuous) {
        throw DomainError("group_summary: '" + group_var + "' is continuous; grouping needs levels");
    }

    std::vector<std::string> level_order;
    if (var.kind == VarKind::binary) {
        level_order = {"0", "1"};
    } else {
        level_order = var.levels;
    }

    struct Bucket {
        std::vector<double> width, mape, misclass;
    };
    std::map<std::string, Bucket> buckets;
    Bucket overall;
    const bool has_threshold = instability.front().misclass_prob.has_value();
    for (std::size_t k = 0; k < precision.size(); ++k) {
        const auto& p = precision[k];
        const auto& s = instability[k];
        auto& b = buckets[ds.level_of(p.row_index, vi)];
        b.width.push_back(p.width);
        b.mape.push_back(s.mape);
        overall.width.push_back(p.width);
        overall.mape.push_back(s.mape);
        if (has_threshold) {
            b.misclass.push_back(*s.misclass_prob);
            overall.misclass.push_back(*s.misclass_prob);
        }
    }

    auto to_table = [&](const std::string& label, const Bucket& b) {
        SummaryTable t;
        t.group_label = label;
        t.group_n = b.width.size();
        t.width = summarize(b.width);
        t.mape = summarize(b.mape);
        if (has_threshold) t.misclass = summarize(b.misclass);
        return t;
    };

    std::vector<SummaryTable> out;
    for (const auto& level : level_order) {
        auto it = buckets.find(level);
        if (it != buckets.end()) out.push_back(to_table(level, it->second));
    }
    out.push_back(to_table("Overall", overall));
    return out;
}

namespace detail {

inline std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

inline std::string quad_cell(const Summary& s) {
    return fmt4(s.mean) + " (" + fmt4(s.min) + ", " + fmt4(s.median) + ", " + fmt4(s.max) + ")";
}

} // namespace detail

inline std::string summary_to_csv(const std::vector<SummaryTable>& tables) {
    std::string out =
        "group,n,width_mean,width_min,width_median,width_max,"
        "mape_mean,mape_min,mape_median,mape_max,"
        "misclass_mean,misclass_min,misclass_median,misclass_max\n";
    for (const auto& t : tables) {
        out += csv::quote_field(t.group_label) + ',' + std::to_string(t.group_n);
        for (const Summary& s : {t.width, t.mape}) {
            out += ',' + csv::format_double(s.mean) + ',' + csv::format_double(s.min) + ',' +
                   csv::format_double(s.median) + ',' + csv::format_double(s.max);
        }
        if (t.misclass) {
            out += ',' + csv::format_double(t.misclass->mean) + ',' + csv::format_double(t.misclass->min) +
                   ',' + csv::format_double(t.misclass->median) + ',' + csv::format_double(t.misclass->max);
        } else {
            out += ",,,,";
        }
        out += '\n';
    }
    return out;
}

// Aligned-column report: one row per group, each metric shown as
// "mean (min, median, max)".
inline std::string summary_to_text(const std::vector<SummaryTable>& tables) {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"Group", "N", "Interval width", "MAPE", "P(misclassification)"});
    for (const auto& t : tables) {
        grid.push_back({t.group_label, std::to_string(t.group_n), detail::quad_cell(t.width),
                        detail::quad_cell(t.mape),
                        t.misclass ? detail::quad_cell(*t.misclass) : std::string("-")});
    }
    std::vector<std::size_t> w(grid[0].size(), 0);
    for (const auto& row : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) w[c] = std::max(w[c], row[c].size());
    }
    std::string out;
    for (const auto& row : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size()) out += std::string(w[c] - row[c].size() + 2, ' ');
        }
        out += '\n';
    }
    return out;
}

inline std::string to_csv(const std::vector<InstabilityRecord>& records) {
    std::string out = "row_index,true_risk,misclass_prob,mape\n";
    for (const auto& r : records) {
        out += std::to_string(r.row_index) + ',' + csv::format_double(r.true_risk) + ',' +
               (r.misclass_prob ? csv::format_double(*r.misclass_prob) : std::string()) + ',' +
               csv::format_double(r.mape) + '\n';
    }
    return out;
}

} // namespace pmstab
