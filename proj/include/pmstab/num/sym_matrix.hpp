#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pmstab/errors.hpp"

namespace pmstab::num {

// Small dense symmetric matrix, row-major full storage. set() writes both
// mirror entries so symmetry holds by construction.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(int dim) : dim_(dim), a_(static_cast<std::size_t>(dim) * dim, 0.0) {
        if (dim < 1) throw DomainError("SymMatrix: dim must be >= 1");
    }

    static SymMatrix identity(int dim) {
        SymMatrix m(dim);
        for (int i = 0; i < dim; ++i) m.set(i, i, 1.0);
        return m;
    }

    int dim() const { return dim_; }

    double operator()(int i, int j) const { return a_[idx(i, j)]; }

    void set(int i, int j, double v) {
        a_[idx(i, j)] = v;
        a_[idx(j, i)] = v;
    }

    bool all_finite() const {
        for (double v : a_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

private:
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * dim_ + j; }

    int dim_ = 0;
    std::vector<double> a_;
};

// Lower-triangular Cholesky factor of an SPD matrix. A non-positive pivot
// means the input is not positive definite (e.g., a constant or perfectly
// collinear predictor made the information matrix singular).
class CholeskyFactor {
public:
    explicit CholeskyFactor(const SymMatrix& m) : dim_(m.dim()), l_(static_cast<std::size_t>(dim_) * dim_, 0.0) {
        for (int j = 0; j < dim_; ++j) {
            double d = m(j, j);
            for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
            if (!(d > 0.0) || !std::isfinite(d)) {
                throw NotPositiveDefinite("non-positive pivot at row " + std::to_string(j));
            }
            const double ljj = std::sqrt(d);
            lref(j, j) = ljj;
            for (int i = j + 1; i < dim_; ++i) {
                double s = m(i, j);
                for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
                lref(i, j) = s / ljj;
            }
        }
    }

    int dim() const { return dim_; }

    // Solves A x = b in place (forward then backward substitution).
    void solve_in_place(std::span<double> b) const {
        for (int i = 0; i < dim_; ++i) {
            double s = b[static_cast<std::size_t>(i)];
            for (int k = 0; k < i; ++k) s -= l(i, k) * b[static_cast<std::size_t>(k)];
            b[static_cast<std::size_t>(i)] = s / l(i, i);
        }
        for (int i = dim_ - 1; i >= 0; --i) {
            double s = b[static_cast<std::size_t>(i)];
            for (int k = i + 1; k < dim_; ++k) s -= l(k, i) * b[static_cast<std::size_t>(k)];
            b[static_cast<std::size_t>(i)] = s / l(i, i);
        }
    }

    // x' A^{-1} x = || L^{-1} x ||^2, via one forward substitution.
    double quad_form_inverse(std::span<const double> x) const {
        std::vector<double> z(x.begin(), x.end());
        double q = 0.0;
        for (int i = 0; i < dim_; ++i) {
            double s = z[static_cast<std::size_t>(i)];
            for (int k = 0; k < i; ++k) s -= l(i, k) * z[static_cast<std::size_t>(k)];
            const double zi = s / l(i, i);
            z[static_cast<std::size_t>(i)] = zi;
            q += zi * zi;
        }
        return q;
    }

    SymMatrix inverse() const {
        SymMatrix inv(dim_);
        std::vector<double> e(static_cast<std::size_t>(dim_), 0.0);
        for (int j = 0; j < dim_; ++j) {
            std::fill(e.begin(), e.end(), 0.0);
            e[static_cast<std::size_t>(j)] = 1.0;
            solve_in_place(e);
            for (int i = j; i < dim_; ++i) inv.set(i, j, e[static_cast<std::size_t>(i)]);
        }
        return inv;
    }

    // y = L z: maps iid standard normals z to draws with covariance L L'.
    std::vector<double> mul_lower(std::span<const double> z) const {
        std::vector<double> y(static_cast<std::size_t>(dim_), 0.0);
        for (int i = 0; i < dim_; ++i) {
            double s = 0.0;
            for (int k = 0; k <= i; ++k) s += l(i, k) * z[static_cast<std::size_t>(k)];
            y[static_cast<std::size_t>(i)] = s;
        }
        return y;
    }

private:
    double l(int i, int j) const { return l_[static_cast<std::size_t>(i) * dim_ + j]; }
    double& lref(int i, int j) { return l_[static_cast<std::size_t>(i) * dim_ + j]; }

    int dim_;
    std::vector<double> l_;
};

inline SymMatrix invert_spd(const SymMatrix& m) {
    return CholeskyFactor(m).inverse();
}

inline double quad_form(const SymMatrix& m, std::span<const double> x) {
    if (static_cast<int>(x.size()) != m.dim()) {
        throw DimensionMismatch("quad_form: vector length != matrix dim");
    }
    double q = 0.0;
    for (int i = 0; i < m.dim(); ++i) {
        double s = 0.0;
        for (int j = 0; j < m.dim(); ++j) s += m(i, j) * x[static_cast<std::size_t>(j)];
        q += x[static_cast<std::size_t>(i)] * s;
    }
    return q;
}

inline SymMatrix scaled(const SymMatrix& m, double c) {
    SymMatrix out(m.dim());
    for (int i = 0; i < m.dim(); ++i) {
        for (int j = i; j < m.dim(); ++j) out.set(i, j, c * m(i, j));
    }
    return out;
}

} // namespace pmstab::num
