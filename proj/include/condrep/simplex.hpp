#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "condrep/error.hpp"
#include "condrep/matrix.hpp"
#include "condrep/rational.hpp"

namespace condrep {

/// Outcome of the phase-one simplex on {g >= 0 : A g = b}.
template <class Scalar>
struct PhaseOneResult {
    bool feasible = false;
    std::vector<Scalar> x;   // basic feasible point when feasible
    std::vector<Scalar> y;   // Farkas vector when infeasible: y'A <= 0, y'b = 1
    std::size_t pivots = 0;
};

/// Phase-one simplex on the tableau [A | I | b]: Bland's rule in exact
/// arithmetic, Dantzig pricing with a Bland fallback in floating point. Rows with
/// negative right-hand side are negated first so the artificial basis is
/// feasible. With exact scalars pass eps = 0.
template <class Scalar>
PhaseOneResult<Scalar> phase_one(const Matrix<Scalar>& A, const std::vector<Scalar>& b,
                                 Scalar eps = Scalar(0), std::size_t max_pivots = 1000000) {
    const std::size_t m = A.rows(), n = A.cols();
    if (b.size() != m) throw DimensionMismatch("right-hand side has " + std::to_string(b.size()) + " entries, expected " + std::to_string(m));
    const std::size_t width = n + m + 1;
    const std::size_t rhs = n + m;
    Matrix<Scalar> T(m, width, Scalar(0));
    std::vector<int> sign(m, 1);
    for (std::size_t i = 0; i < m; ++i) {
        sign[i] = b[i] < 0 ? -1 : 1;
        for (std::size_t j = 0; j < n; ++j) T(i, j) = sign[i] < 0 ? Scalar(-A(i, j)) : A(i, j);
        T(i, n + i) = Scalar(1);
        T(i, rhs) = sign[i] < 0 ? Scalar(-b[i]) : b[i];
    }
    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;

    // In floating point, ties in the ratio test are broken by perturbing the
    // right-hand side by small distinct amounts; the basic solution is recomputed
    // from the unperturbed data at the end.
    std::vector<Scalar> b0;
    if constexpr (!scalar_traits<Scalar>::exact) {
        Scalar bscale(1);
        for (std::size_t i = 0; i < m; ++i) {
            b0.push_back(T(i, rhs));
            bscale = std::max(bscale, T(i, rhs));
        }
        for (std::size_t i = 0; i < m; ++i) {
            const double phase = std::fmod(0.6180339887498949 * static_cast<double>(i + 1), 1.0);
            T(i, rhs) += bscale * Scalar(1e-11) * Scalar(1 + phase);
        }
    }

    // Reduced cost of column j for phase-one cost (0 on originals, 1 on artificials).
    std::vector<Scalar> reduced(width, Scalar(0));
    auto refresh_reduced = [&] {
        for (std::size_t j = 0; j < width; ++j) {
            Scalar r = (j >= n && j < rhs) ? Scalar(1) : Scalar(0);
            for (std::size_t i = 0; i < m; ++i)
                if (basis[i] >= n) r -= T(i, j);
            reduced[j] = r;
        }
    };
    refresh_reduced();

    PhaseOneResult<Scalar> out;
    std::size_t degenerate_run = 0;
    for (;;) {
        std::optional<std::size_t> enter;
        if (scalar_traits<Scalar>::exact || degenerate_run >= 50) {
            for (std::size_t j = 0; j < rhs; ++j)
                if (reduced[j] < -eps) { enter = j; break; }
        } else {
            // Dantzig pricing; Bland takes over after a run of degenerate pivots.
            Scalar best = -eps;
            for (std::size_t j = 0; j < rhs; ++j)
                if (reduced[j] < best) {
                    best = reduced[j];
                    enter = j;
                }
        }
        if (!enter) break;
        std::optional<std::size_t> leave;
        Scalar best_ratio(0);
        if constexpr (scalar_traits<Scalar>::exact) {
            for (std::size_t i = 0; i < m; ++i) {
                if (!(T(i, *enter) > 0)) continue;
                Scalar ratio = T(i, rhs) / T(i, *enter);
                if (!leave || ratio < best_ratio || (ratio == best_ratio && basis[i] < basis[*leave])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
        } else {
            // Ties within rounding go to the smallest basic index, as Bland's rule
            // requires; tiny pivots are skipped.
            Scalar colmax(0);
            for (std::size_t i = 0; i < m; ++i) colmax = std::max(colmax, T(i, *enter));
            const Scalar piv_tol = std::max<Scalar>(eps, Scalar(1e-9) * colmax);
            for (std::size_t i = 0; i < m; ++i) {
                if (!(T(i, *enter) > piv_tol)) continue;
                Scalar ratio = T(i, rhs) / T(i, *enter);
                if (!leave || ratio < best_ratio) best_ratio = ratio;
                if (!leave) leave = i;
            }
            if (leave) {
                const Scalar slack = Scalar(1e-12) * (Scalar(1) + scalar_traits<Scalar>::abs(best_ratio));
                leave.reset();
                for (std::size_t i = 0; i < m; ++i) {
                    if (!(T(i, *enter) > piv_tol)) continue;
                    if (T(i, rhs) / T(i, *enter) <= best_ratio + slack && (!leave || basis[i] < basis[*leave])) leave = i;
                }
            }
        }
        if (!leave) break; // unbounded direction cannot occur in phase one; defensive
        const std::size_t r = *leave, c = *enter;
        Scalar pivot = T(r, c);
        if constexpr (!scalar_traits<Scalar>::exact) {
            if (T(r, rhs) / pivot > eps) degenerate_run = 0;
            else ++degenerate_run;
        }
        for (std::size_t j = 0; j < width; ++j) T(r, j) /= pivot;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == r) continue;
            Scalar factor = T(i, c);
            if (factor == 0) continue;
            for (std::size_t j = 0; j < width; ++j) T(i, j) -= factor * T(r, j);
        }
        {
            Scalar factor = reduced[c];
            for (std::size_t j = 0; j < width; ++j) reduced[j] -= factor * T(r, j);
        }
        basis[r] = c;
        if (++out.pivots > max_pivots) throw DomainError("simplex pivot limit exceeded");
        if constexpr (!scalar_traits<Scalar>::exact) {
            if (out.pivots % 64 == 0) refresh_reduced();
        }
    }

    if constexpr (!scalar_traits<Scalar>::exact) {
        // Artificial columns hold the basis inverse of the sign-adjusted system.
        for (std::size_t i = 0; i < m; ++i) {
            Scalar v(0);
            for (std::size_t k = 0; k < m; ++k) v += T(i, n + k) * b0[k];
            T(i, rhs) = v;
        }
    }

    Scalar objective(0);
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] >= n) objective += T(i, rhs);

    Scalar feas_tol = eps;
    if constexpr (!scalar_traits<Scalar>::exact) {
        Scalar scale(1);
        for (const auto& v : b) scale = std::max(scale, scalar_traits<Scalar>::abs(v));
        feas_tol = eps * scale * Scalar(static_cast<double>(m + 1));
    }
    if (objective <= feas_tol) {
        out.feasible = true;
        out.x.assign(n, Scalar(0));
        for (std::size_t i = 0; i < m; ++i)
            if (basis[i] < n) out.x[basis[i]] = T(i, rhs);
        if constexpr (!scalar_traits<Scalar>::exact)
            for (auto& v : out.x) if (v < 0) v = 0;
    } else {
        // Dual of the flipped system: y'_i = 1 - reduced cost of artificial i.
        out.y.assign(m, Scalar(0));
        for (std::size_t i = 0; i < m; ++i) {
            Scalar yi = Scalar(1) - reduced[n + i];
            if (sign[i] < 0) yi = -yi;
            out.y[i] = yi / objective;
        }
    }
    return out;
}

} // namespace condrep
