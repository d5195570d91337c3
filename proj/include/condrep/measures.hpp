#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "condrep/error.hpp"
#include "condrep/matrix.hpp"
#include "condrep/rational.hpp"

namespace condrep {

/// Comparison tolerance used when none is given: exact for rationals.
template <class Scalar>
Scalar default_tol() {
    if constexpr (scalar_traits<Scalar>::exact) return Scalar(0);
    else return Scalar(1e-12);
}

/// Row r is the conditional law given the r-th conditioning atom.
template <class Scalar>
struct ConditionalKernel {
    Matrix<Scalar> rows;
};

/// Finitely supported joint law of (X, Y). Validated on construction and
/// immutable afterwards.
template <class Scalar>
class DiscreteJoint {
public:
    using scalar_type = Scalar;

    DiscreteJoint(std::vector<Scalar> xs, std::vector<Scalar> ys, Matrix<Scalar> P,
                  Scalar tol = default_tol<Scalar>())
        : xs_(std::move(xs)), ys_(std::move(ys)), P_(std::move(P)) {
        const std::size_t I = P_.rows(), J = P_.cols();
        if (I == 0 || J == 0) throw InvalidInput("joint law needs at least one row and one column");
        if (xs_.size() != I) throw DimensionMismatch("xs has " + std::to_string(xs_.size()) + " entries, P has " + std::to_string(I) + " rows");
        if (ys_.size() != J) throw DimensionMismatch("ys has " + std::to_string(ys_.size()) + " entries, P has " + std::to_string(J) + " columns");
        for (std::size_t i = 1; i < I; ++i)
            if (!(xs_[i - 1] < xs_[i])) throw InvalidInput("xs must be strictly increasing");
        {
            std::vector<Scalar> sorted = ys_;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                throw InvalidInput("ys must be pairwise distinct");
        }
        mu_.assign(I, Scalar(0));
        nu_.assign(J, Scalar(0));
        Scalar total(0);
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t j = 0; j < J; ++j) {
                const Scalar& p = P_(i, j);
                if (p < 0) throw InvalidInput("negative probability at (" + std::to_string(i) + "," + std::to_string(j) + ")");
                mu_[i] += p;
                nu_[j] += p;
                total += p;
            }
        if (scalar_traits<Scalar>::abs(total - Scalar(1)) > tol)
            throw InvalidInput("probabilities sum to " + to_string(total) + ", expected 1");
        for (std::size_t i = 0; i < I; ++i)
            if (!(mu_[i] > 0)) throw InvalidInput("row " + std::to_string(i) + " has zero mass");
        for (std::size_t j = 0; j < J; ++j)
            if (!(nu_[j] > 0)) throw InvalidInput("column " + std::to_string(j) + " has zero mass");
    }

    /// Convenience constructor with xs = 0..I-1 and ys = 0..J-1.
    explicit DiscreteJoint(Matrix<Scalar> P, Scalar tol = default_tol<Scalar>())
        : DiscreteJoint(iota(P.rows()), iota(P.cols()), std::move(P), tol) {}

    std::size_t I() const noexcept { return P_.rows(); }
    std::size_t J() const noexcept { return P_.cols(); }
    const std::vector<Scalar>& xs() const noexcept { return xs_; }
    const std::vector<Scalar>& ys() const noexcept { return ys_; }
    const Matrix<Scalar>& P() const noexcept { return P_; }
    const std::vector<Scalar>& mu() const noexcept { return mu_; }
    const std::vector<Scalar>& nu() const noexcept { return nu_; }

    friend bool operator==(const DiscreteJoint& a, const DiscreteJoint& b) {
        return a.xs_ == b.xs_ && a.ys_ == b.ys_ && a.P_ == b.P_;
    }

private:
    static std::vector<Scalar> iota(std::size_t n) {
        std::vector<Scalar> v(n);
        for (std::size_t k = 0; k < n; ++k) v[k] = Scalar(static_cast<long>(k));
        return v;
    }

    std::vector<Scalar> xs_, ys_;
    Matrix<Scalar> P_;
    std::vector<Scalar> mu_, nu_;
};

template <class Scalar>
std::pair<std::vector<Scalar>, std::vector<Scalar>> marginals(const DiscreteJoint<Scalar>& dj) {
    return {dj.mu(), dj.nu()};
}

/// M_ij = P(Y = y_j | X = x_i).
template <class Scalar>
ConditionalKernel<Scalar> kernel_x_given(const DiscreteJoint<Scalar>& dj) {
    Matrix<Scalar> M(dj.I(), dj.J());
    for (std::size_t i = 0; i < dj.I(); ++i)
        for (std::size_t j = 0; j < dj.J(); ++j) M(i, j) = dj.P()(i, j) / dj.mu()[i];
    return {std::move(M)};
}

/// M*_ji = P(X = x_i | Y = y_j).
template <class Scalar>
ConditionalKernel<Scalar> kernel_y_given(const DiscreteJoint<Scalar>& dj) {
    Matrix<Scalar> Ms(dj.J(), dj.I());
    for (std::size_t i = 0; i < dj.I(); ++i)
        for (std::size_t j = 0; j < dj.J(); ++j) Ms(j, i) = dj.P()(i, j) / dj.nu()[j];
    return {std::move(Ms)};
}

/// Row index carrying column j when the column has a single nonzero entry.
template <class Scalar>
std::optional<std::size_t> concentrated_row(const DiscreteJoint<Scalar>& dj, std::size_t j) {
    std::optional<std::size_t> row;
    for (std::size_t i = 0; i < dj.I(); ++i) {
        if (dj.P()(i, j) > 0) {
            if (row) return std::nullopt;
            row = i;
        }
    }
    return row;
}

/// Columns whose reverse conditional law is a point mass. With tol == 0 the
/// test is exact (single nonzero entry); otherwise max_i M*_ji >= 1 - tol.
template <class Scalar>
std::vector<std::size_t> dirac_set(const DiscreteJoint<Scalar>& dj, Scalar tol = Scalar(0)) {
    if (tol < 0 || tol > Scalar(1) / Scalar(1000000))
        throw InvalidInput("dirac_set tolerance must lie in [0, 1e-6]");
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < dj.J(); ++j) {
        if (tol == 0) {
            if (concentrated_row(dj, j)) out.push_back(j);
            continue;
        }
        Scalar best(0);
        for (std::size_t i = 0; i < dj.I(); ++i) best = std::max<Scalar>(best, dj.P()(i, j) / dj.nu()[j]);
        if (best >= Scalar(1) - tol) out.push_back(j);
    }
    return out;
}

/// Columns whose x-support fits in a half-open interval (a, a + eps]; that is
/// the support diameter is strictly below eps.
template <class Scalar>
std::vector<std::size_t> d_epsilon_set(const DiscreteJoint<Scalar>& dj, Scalar eps) {
    if (!(eps > 0)) throw InvalidInput("eps must be positive");
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < dj.J(); ++j) {
        std::optional<Scalar> lo, hi;
        for (std::size_t i = 0; i < dj.I(); ++i) {
            if (!(dj.P()(i, j) > 0)) continue;
            if (!lo) lo = dj.xs()[i];
            hi = dj.xs()[i];
        }
        if (*hi - *lo < eps) out.push_back(j);
    }
    return out;
}

} // namespace condrep
