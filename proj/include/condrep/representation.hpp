#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "condrep/error.hpp"
#include "condrep/measures.hpp"
#include "condrep/simplex.hpp"

namespace condrep {

/// tau[i] is the column whose reverse conditional law is the point mass at x_i.
struct TauWitness {
    std::vector<std::size_t> tau;
};

template <class Scalar>
struct FeasibilityResult {
    bool feasible = false;
    std::vector<Scalar> g;     // when feasible
    std::vector<Scalar> cert;  // when infeasible
    Scalar residual = Scalar(0);  // max |Mg - f| for g, or max_j (cert'M)_j for cert
    bool verified = false;
};

/// Smallest admissible column per row, or nullopt when some row has none.
template <class Scalar>
std::optional<TauWitness> find_tau(const DiscreteJoint<Scalar>& dj) {
    TauWitness w;
    w.tau.assign(dj.I(), dj.J());
    for (std::size_t j = 0; j < dj.J(); ++j) {
        auto row = concentrated_row(dj, j);
        if (row && w.tau[*row] == dj.J()) w.tau[*row] = j;
    }
    for (std::size_t i = 0; i < dj.I(); ++i)
        if (w.tau[i] == dj.J()) return std::nullopt;
    return w;
}

/// Every row gives positive mass to the Dirac set.
template <class Scalar>
bool check_condition_D(const DiscreteJoint<Scalar>& dj) {
    std::vector<bool> charged(dj.I(), false);
    for (std::size_t j : dirac_set(dj)) {
        for (std::size_t i = 0; i < dj.I(); ++i)
            if (dj.P()(i, j) > 0) charged[i] = true;
    }
    return std::all_of(charged.begin(), charged.end(), [](bool b) { return b; });
}

template <class Scalar>
void check_dims(const DiscreteJoint<Scalar>& dj, const std::vector<Scalar>& f) {
    if (f.size() != dj.I())
        throw DimensionMismatch("f has " + std::to_string(f.size()) + " entries, expected " + std::to_string(dj.I()));
}

/// Spreads f_i uniformly (per unit of conditional mass) over the Dirac
/// columns concentrated at x_i. Exact in rational mode.
template <class Scalar>
std::vector<Scalar> construct_g_dirac(const DiscreteJoint<Scalar>& dj, const std::vector<Scalar>& f) {
    check_dims(dj, f);
    for (const auto& v : f)
        if (v < 0) throw InvalidInput("f must be nonnegative");
    std::vector<Scalar> dmass(dj.I(), Scalar(0));
    std::vector<std::optional<std::size_t>> owner(dj.J());
    for (std::size_t j : dirac_set(dj)) {
        owner[j] = concentrated_row(dj, j);
        dmass[*owner[j]] += dj.P()(*owner[j], j) / dj.mu()[*owner[j]];
    }
    for (std::size_t i = 0; i < dj.I(); ++i)
        if (!(dmass[i] > 0))
            throw ConditionDViolated("row " + std::to_string(i) + " gives no mass to the Dirac set");
    std::vector<Scalar> g(dj.J(), Scalar(0));
    for (std::size_t j = 0; j < dj.J(); ++j)
        if (owner[j]) g[j] = f[*owner[j]] / dmass[*owner[j]];
    return g;
}

/// Solves M g = f with g >= 0, or returns y with (y'M)_j <= 0 for all j and
/// y'f = 1. Both outcomes are re-verified against the original data.
template <class Scalar>
FeasibilityResult<Scalar> solve_nonneg(const DiscreteJoint<Scalar>& dj, const std::vector<Scalar>& f,
                                       Scalar tol = default_tol<Scalar>()) {
    check_dims(dj, f);
    auto M = kernel_x_given(dj).rows;
    Scalar eps(0);
    if constexpr (!scalar_traits<Scalar>::exact) eps = std::min<Scalar>(tol, Scalar(1e-11));
    auto lp = phase_one(M, f, eps);

    FeasibilityResult<Scalar> out;
    out.feasible = lp.feasible;
    if (lp.feasible) {
        out.g = std::move(lp.x);
        Scalar worst(0);
        for (std::size_t i = 0; i < dj.I(); ++i) {
            Scalar s(0);
            for (std::size_t j = 0; j < dj.J(); ++j) s += M(i, j) * out.g[j];
            worst = std::max<Scalar>(worst, scalar_traits<Scalar>::abs(s - f[i]));
        }
        out.residual = worst;
        out.verified = worst <= tol &&
                       std::all_of(out.g.begin(), out.g.end(), [](const Scalar& v) { return v >= 0; });
    } else {
        out.cert = std::move(lp.y);
        Scalar worst(0), yf(0);
        bool first = true;
        for (std::size_t j = 0; j < dj.J(); ++j) {
            Scalar s(0);
            for (std::size_t i = 0; i < dj.I(); ++i) s += out.cert[i] * M(i, j);
            if (first || s > worst) worst = s;
            first = false;
        }
        for (std::size_t i = 0; i < dj.I(); ++i) yf += out.cert[i] * f[i];
        out.residual = worst;
        out.verified = worst <= tol && yf > tol;
    }
    return out;
}

template <class Scalar>
struct RplusReport {
    bool rplus = false;
    std::optional<TauWitness> tau;
    std::vector<std::size_t> dirac;
    bool agrees = false;
    // Rows whose indicator is not representable, with their certificates.
    std::vector<std::size_t> failing_rows;
    std::vector<std::vector<Scalar>> certificates;
    bool all_verified = true;
};

/// LP decision over every coordinate indicator, cross-checked against find_tau.
template <class Scalar>
RplusReport<Scalar> decide_Rplus(const DiscreteJoint<Scalar>& dj, Scalar tol = default_tol<Scalar>()) {
    RplusReport<Scalar> rep;
    rep.rplus = true;
    for (std::size_t i = 0; i < dj.I(); ++i) {
        std::vector<Scalar> e(dj.I(), Scalar(0));
        e[i] = Scalar(1);
        auto res = solve_nonneg(dj, e, tol);
        rep.all_verified = rep.all_verified && res.verified;
        if (!res.feasible) {
            rep.rplus = false;
            rep.failing_rows.push_back(i);
            rep.certificates.push_back(std::move(res.cert));
        }
    }
    rep.tau = find_tau(dj);
    rep.dirac = dirac_set(dj);
    rep.agrees = rep.rplus == rep.tau.has_value();
    return rep;
}

struct NecessaryReport {
    bool holds = false;
    // A restricted to rows giving zero mass to the Dirac set; the condition
    // only constrains such rows. Empty restriction means vacuously true.
    std::vector<std::size_t> restricted;
    bool vacuous = false;
    std::vector<std::size_t> witnesses;  // non-Dirac columns with support inside the restriction
    std::vector<std::size_t> dirac;      // excluded columns
};

/// Necessary condition for representability on a row subset A.
template <class Scalar>
NecessaryReport check_necessary(const DiscreteJoint<Scalar>& dj, const std::vector<std::size_t>& A) {
    if (A.empty()) throw EmptyA("row subset A is empty");
    std::vector<bool> inA(dj.I(), false);
    for (std::size_t i : A) {
        if (i >= dj.I()) throw DimensionMismatch("row index " + std::to_string(i) + " out of range");
        inA[i] = true;
    }
    NecessaryReport rep;
    rep.dirac = dirac_set(dj);
    std::vector<bool> isD(dj.J(), false), charged(dj.I(), false);
    for (std::size_t j : rep.dirac) {
        isD[j] = true;
        for (std::size_t i = 0; i < dj.I(); ++i)
            if (dj.P()(i, j) > 0) charged[i] = true;
    }
    std::vector<bool> inR(dj.I(), false);
    for (std::size_t i = 0; i < dj.I(); ++i)
        if (inA[i] && !charged[i]) {
            inR[i] = true;
            rep.restricted.push_back(i);
        }
    if (rep.restricted.empty()) {
        rep.vacuous = true;
        rep.holds = true;
        return rep;
    }
    for (std::size_t j = 0; j < dj.J(); ++j) {
        if (isD[j]) continue;
        bool inside = true;
        for (std::size_t i = 0; i < dj.I() && inside; ++i)
            if (dj.P()(i, j) > 0 && !inR[i]) inside = false;
        if (inside) rep.witnesses.push_back(j);
    }
    rep.holds = !rep.witnesses.empty();
    return rep;
}

} // namespace condrep
