#pragma once

#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "pmstab/core_model.hpp"
#include "pmstab/csv.hpp"
#include "pmstab/errors.hpp"
#include "pmstab/num/summation.hpp"
#include "pmstab/num/sym_matrix.hpp"
#include "pmstab/population.hpp"

namespace pmstab {

inline std::string model_digest(const CoreModel& m) {
    std::string text = csv::format_double(m.alpha) + "|" + csv::format_double(m.delta);
    for (double b : m.betas) text += "|" + csv::format_double(b);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(num::RngStream::fnv1a(text)));
    return buf;
}

// Per-observation Fisher information of the logistic core model, taken as an
// expectation over the supplied rows: I = mean_i w_i x~_i x~_i' with
// w_i = p_i (1 - p_i) and x~_i = (1, x_i).
struct UnitInformation {
    num::SymMatrix matrix;
    std::size_t n_source = 0;
    std::string model_digest;
};

inline UnitInformation unit_information(const CoreModel& m, const Dataset& ds) {
    if (ds.n() == 0) throw EmptyInput("unit_information over empty dataset");
    const int p1 = ds.n_columns() + 1;
    std::vector<num::CompensatedSum> acc(static_cast<std::size_t>(p1) * p1);
    std::vector<double> xt(static_cast<std::size_t>(p1));
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto row = ds.row(i);
        const double p = risk(m, row);
        const double w = p * (1.0 - p);
        xt[0] = 1.0;
        for (int k = 0; k < p1 - 1; ++k) xt[static_cast<std::size_t>(k) + 1] = row[static_cast<std::size_t>(k)];
        for (int a = 0; a < p1; ++a) {
            for (int b = a; b < p1; ++b) {
                acc[static_cast<std::size_t>(a) * p1 + b].add(w * xt[static_cast<std::size_t>(a)] *
                                                              xt[static_cast<std::size_t>(b)]);
            }
        }
    }
    num::SymMatrix info(p1);
    for (int a = 0; a < p1; ++a) {
        for (int b = a; b < p1; ++b) {
            info.set(a, b, acc[static_cast<std::size_t>(a) * p1 + b].value() / static_cast<double>(ds.n()));
        }
    }
    return UnitInformation{std::move(info), ds.n(), model_digest(m)};
}

// var(beta-hat) = n^{-1} I^{-1}
inline num::SymMatrix vcov(const UnitInformation& info, std::size_t n) {
    if (n < 1) throw DomainError("vcov: n must be >= 1");
    return num::scaled(num::invert_spd(info.matrix), 1.0 / static_cast<double>(n));
}

namespace detail {

inline std::vector<double> with_intercept(std::span<const double> x) {
    std::vector<double> xt(x.size() + 1);
    xt[0] = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) xt[k + 1] = x[k];
    return xt;
}

} // namespace detail

// Variance of a new individual's logit-risk: n^{-1} x~ I^{-1} x~'.
inline double var_logit(const UnitInformation& info, std::size_t n, std::span<const double> x) {
    if (n < 1) throw DomainError("var_logit: n must be >= 1");
    if (static_cast<int>(x.size()) + 1 != info.matrix.dim()) {
        throw DimensionMismatch("var_logit: row length+1 != information dim");
    }
    const auto xt = detail::with_intercept(x);
    return num::CholeskyFactor(info.matrix).quad_form_inverse(xt) / static_cast<double>(n);
}

inline std::string to_csv(const UnitInformation& info) {
    std::string out;
    const int d = info.matrix.dim();
    for (int i = 0; i < d; ++i) {
        std::vector<std::string> fields;
        fields.reserve(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) fields.push_back(csv::format_double(info.matrix(i, j)));
        out += csv::join_row(fields);
    }
    return out;
}

} // namespace pmstab
