#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "condrep/error.hpp"
#include "condrep/interval_set.hpp"
#include "condrep/measures.hpp"
#include "condrep/rng.hpp"

namespace condrep {

/// (Tg)_i = sum_j M_ij g_j, the conditional expectation of g(Y) given X = x_i.
template <class Scalar>
std::vector<Scalar> apply_T(const DiscreteJoint<Scalar>& dj, const std::vector<Scalar>& g) {
    if (g.size() != dj.J())
        throw DimensionMismatch("g has " + std::to_string(g.size()) + " entries, expected " + std::to_string(dj.J()));
    std::vector<Scalar> f(dj.I(), Scalar(0));
    for (std::size_t i = 0; i < dj.I(); ++i) {
        Scalar s(0);
        for (std::size_t j = 0; j < dj.J(); ++j) s += dj.P()(i, j) * g[j];
        f[i] = s / dj.mu()[i];
    }
    return f;
}

/// (T*f)_j = sum_i M*_ji f_i, the conditional expectation of f(X) given Y = y_j.
template <class Scalar>
std::vector<Scalar> apply_Tstar(const DiscreteJoint<Scalar>& dj, const std::vector<Scalar>& fstar) {
    if (fstar.size() != dj.I())
        throw DimensionMismatch("f* has " + std::to_string(fstar.size()) + " entries, expected " + std::to_string(dj.I()));
    std::vector<Scalar> g(dj.J(), Scalar(0));
    for (std::size_t j = 0; j < dj.J(); ++j) {
        Scalar s(0);
        for (std::size_t i = 0; i < dj.I(); ++i) s += dj.P()(i, j) * fstar[i];
        g[j] = s / dj.nu()[j];
    }
    return g;
}

template <class Scalar>
Scalar weighted_inner(const std::vector<Scalar>& w, const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
    Scalar s(0);
    for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * a[k] * b[k];
    return s;
}

template <class Scalar>
Scalar weighted_l1(const std::vector<Scalar>& w, const std::vector<Scalar>& a) {
    Scalar s(0);
    for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * scalar_traits<Scalar>::abs(a[k]);
    return s;
}

inline double sup_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::fabs(x));
    return s;
}

struct XiResult {
    Rational xi_exact;          // filled in rational mode
    double xi = 0.0;
    std::vector<std::size_t> argmin;  // a minimizing row subset
    bool surjective = false;
    double delta = 0.0;         // certified 2 xi - 1 when surjective
};

/// xi = min over nonempty row subsets A of max_j P(X in A | Y = y_j), by
/// exhaustive Gray-code enumeration.
template <class Scalar>
XiResult xi_criterion(const DiscreteJoint<Scalar>& dj, std::size_t max_I = 12) {
    if (max_I > 20) throw TooLarge("max_I is capped at 20");
    if (dj.I() > max_I)
        throw TooLarge("I = " + std::to_string(dj.I()) + " exceeds max_I = " + std::to_string(max_I));
    const auto Ms = kernel_y_given(dj).rows;
    const std::size_t I = dj.I(), J = dj.J();
    std::vector<Scalar> colmass(J, Scalar(0));
    std::optional<Scalar> best;
    std::uint32_t best_mask = 0, mask = 0;
    const std::uint32_t total = 1u << I;
    for (std::uint32_t k = 1; k < total; ++k) {
        const std::uint32_t gray = k ^ (k >> 1);
        const std::uint32_t flipped = gray ^ mask;
        const auto row = static_cast<std::size_t>(std::countr_zero(flipped));
        const bool adding = (gray & flipped) != 0;
        for (std::size_t j = 0; j < J; ++j) {
            if (adding) colmass[j] += Ms(j, row);
            else colmass[j] -= Ms(j, row);
        }
        mask = gray;
        Scalar top = *std::max_element(colmass.begin(), colmass.end());
        if (!best || top < *best) {
            best = top;
            best_mask = mask;
        }
    }
    XiResult out;
    if constexpr (scalar_traits<Scalar>::exact) out.xi_exact = *best;
    else out.xi_exact = rational_from_double_exact(*best);
    out.xi = to_double(*best);
    for (std::size_t i = 0; i < I; ++i)
        if (best_mask & (1u << i)) out.argmin.push_back(i);
    out.surjective = *best > Scalar(1) / Scalar(2);
    out.delta = out.surjective ? 2.0 * out.xi - 1.0 : 0.0;
    return out;
}

struct NormBoundsReport {
    std::size_t trials = 0;
    bool l1_nonexpansive = true;     // ||Tg||_1 <= ||g||_1 on every trial
    bool linf_nonexpansive = true;   // ||T*f||_inf <= ||f||_inf on every trial
    double worst_l1_ratio = 0.0;
    double worst_linf_ratio = 0.0;
    // min over probed f* of ||T*f*||_inf / ||f*||_inf; any valid delta is at
    // most this value.
    double delta_estimate = 1.0;
    std::size_t sign_patterns = 0;
    bool exhaustive_signs = false;
    std::optional<double> certified_delta;  // 2 xi - 1 when xi > 1/2 and I is small
};

/// Randomized checks of non-expansiveness and a sampled estimate of the
/// lower-bound constant delta in ||T*f||_inf >= delta ||f||_inf.
template <class Scalar>
NormBoundsReport operator_norm_bounds(const DiscreteJoint<Scalar>& dj, std::size_t trials,
                                      std::uint64_t seed = 0) {
    if (trials < 1) throw InvalidInput("trials must be at least 1");
    std::vector<double> mu(dj.I()), nu(dj.J());
    for (std::size_t i = 0; i < dj.I(); ++i) mu[i] = to_double(dj.mu()[i]);
    for (std::size_t j = 0; j < dj.J(); ++j) nu[j] = to_double(dj.nu()[j]);
    Matrix<double> P(dj.I(), dj.J());
    for (std::size_t i = 0; i < dj.I(); ++i)
        for (std::size_t j = 0; j < dj.J(); ++j) P(i, j) = to_double(dj.P()(i, j));
    auto T = [&](const std::vector<double>& g) {
        std::vector<double> f(dj.I(), 0.0);
        for (std::size_t i = 0; i < dj.I(); ++i) {
            for (std::size_t j = 0; j < dj.J(); ++j) f[i] += P(i, j) * g[j];
            f[i] /= mu[i];
        }
        return f;
    };
    auto Ts = [&](const std::vector<double>& f) {
        std::vector<double> g(dj.J(), 0.0);
        for (std::size_t j = 0; j < dj.J(); ++j) {
            for (std::size_t i = 0; i < dj.I(); ++i) g[j] += P(i, j) * f[i];
            g[j] /= nu[j];
        }
        return g;
    };

    NormBoundsReport rep;
    rep.trials = trials;
    RandomStream rng(seed, stream_id(0x6f70, 1));
    const double slack = 1e-12;
    for (std::size_t t = 0; t < trials; ++t) {
        std::vector<double> g(dj.J()), f(dj.I());
        for (auto& v : g) v = 2.0 * rng.uniform() - 1.0;
        for (auto& v : f) v = 2.0 * rng.uniform() - 1.0;
        double gl1 = weighted_l1(nu, g), tl1 = weighted_l1(mu, T(g));
        double fs = sup_norm(f), ts = sup_norm(Ts(f));
        if (gl1 > 0) rep.worst_l1_ratio = std::max(rep.worst_l1_ratio, tl1 / gl1);
        if (fs > 0) {
            rep.worst_linf_ratio = std::max(rep.worst_linf_ratio, ts / fs);
            rep.delta_estimate = std::min(rep.delta_estimate, ts / fs);
        }
        if (tl1 > gl1 * (1 + slack) + slack) rep.l1_nonexpansive = false;
        if (ts > fs * (1 + slack) + slack) rep.linf_nonexpansive = false;
    }

    auto probe_signs = [&](std::uint64_t bits) {
        std::vector<double> f(dj.I());
        for (std::size_t i = 0; i < dj.I(); ++i) f[i] = ((bits >> i) & 1u) ? -1.0 : 1.0;
        rep.delta_estimate = std::min(rep.delta_estimate, sup_norm(Ts(f)));
        ++rep.sign_patterns;
    };
    if (dj.I() <= 16) {
        // f and -f give the same ratio, so fix the sign of the first entry.
        rep.exhaustive_signs = true;
        const std::uint64_t count = std::uint64_t{1} << (dj.I() - 1);
        for (std::uint64_t b = 0; b < count; ++b) probe_signs(b << 1);
    } else {
        for (std::size_t t = 0; t < trials; ++t) probe_signs(rng.next_u64());
    }
    rep.delta_estimate = std::max(0.0, rep.delta_estimate);

    if (dj.I() <= 12) {
        auto xi = xi_criterion(dj, 12);
        if (xi.surjective) rep.certified_delta = xi.delta;
    }
    return rep;
}

/// Minimum-norm least-squares solution of M g = f without sign constraint.
struct LeastSquaresResult {
    std::vector<double> g;
    double residual_inf = 0.0;
};

template <class Scalar>
LeastSquaresResult solve_unconstrained(const DiscreteJoint<Scalar>& dj, const std::vector<Scalar>& f) {
    if (f.size() != dj.I())
        throw DimensionMismatch("f has " + std::to_string(f.size()) + " entries, expected " + std::to_string(dj.I()));
    Eigen::MatrixXd M(dj.I(), dj.J());
    Eigen::VectorXd b(dj.I());
    for (std::size_t i = 0; i < dj.I(); ++i) {
        for (std::size_t j = 0; j < dj.J(); ++j) M(i, j) = to_double(dj.P()(i, j) / dj.mu()[i]);
        b(i) = to_double(f[i]);
    }
    Eigen::VectorXd g = M.completeOrthogonalDecomposition().solve(b);
    LeastSquaresResult out;
    out.g.assign(g.data(), g.data() + g.size());
    out.residual_inf = (M * g - b).cwiseAbs().maxCoeff();
    return out;
}

/// Y = I X + (1 - I) X' with I ~ Bernoulli(p) independent of X, X' ~ mu.
template <class Scalar>
struct BernoulliMixture {
    Scalar p;
    std::vector<Scalar> xs;  // support of mu, strictly increasing
    std::vector<Scalar> mu;  // weights summing to 1

    void validate() const {
        if (!(p > 0 && p < 1)) throw InvalidInput("p must lie in (0,1)");
        if (xs.size() != mu.size() || xs.empty()) throw DimensionMismatch("mixture support and weights differ in size");
        Scalar total(0);
        for (const auto& w : mu) {
            if (!(w > 0)) throw InvalidInput("mixture weights must be positive");
            total += w;
        }
        if (scalar_traits<Scalar>::abs(total - Scalar(1)) > default_tol<Scalar>())
            throw InvalidInput("mixture weights must sum to 1");
    }

    /// Joint law P_ij = mu_i (p [i == j] + (1 - p) mu_j) on xs x xs.
    DiscreteJoint<Scalar> joint() const {
        validate();
        const std::size_t K = xs.size();
        Matrix<Scalar> P(K, K);
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j)
                P(i, j) = mu[i] * ((i == j ? p : Scalar(0)) + (Scalar(1) - p) * mu[j]);
        return DiscreteJoint<Scalar>(xs, xs, std::move(P));
    }

    static BernoulliMixture uniform(Scalar p, std::size_t K) {
        BernoulliMixture bm{p, {}, {}};
        for (std::size_t k = 0; k < K; ++k) {
            bm.xs.push_back(Scalar(static_cast<long>(k)));
            bm.mu.push_back(Scalar(1) / Scalar(static_cast<long>(K)));
        }
        return bm;
    }
};

template <class Scalar>
struct MixtureSolution {
    std::vector<Scalar> g;
    Scalar mean_f = Scalar(0);
    bool has_negative_part = false;
    std::vector<std::size_t> negative_at;
};

/// Closed-form preimage g = (f - E f) / p + E f.
template <class Scalar>
MixtureSolution<Scalar> bernoulli_mixture_g(const BernoulliMixture<Scalar>& bm, const std::vector<Scalar>& f) {
    bm.validate();
    if (f.size() != bm.xs.size()) throw DimensionMismatch("f must have one value per support point");
    MixtureSolution<Scalar> out;
    for (std::size_t k = 0; k < f.size(); ++k) out.mean_f += bm.mu[k] * f[k];
    out.g.resize(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        out.g[k] = (f[k] - out.mean_f) / bm.p + out.mean_f;
        if (out.g[k] < 0) {
            out.has_negative_part = true;
            out.negative_at.push_back(k);
        }
    }
    return out;
}

/// Mixture kernel applied directly: p g(x) + (1 - p) E_mu[g].
template <class Scalar>
std::vector<Scalar> bernoulli_mixture_T(const BernoulliMixture<Scalar>& bm, const std::vector<Scalar>& g) {
    Scalar mean(0);
    for (std::size_t k = 0; k < g.size(); ++k) mean += bm.mu[k] * g[k];
    std::vector<Scalar> out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) out[k] = bm.p * g[k] + (Scalar(1) - bm.p) * mean;
    return out;
}

struct ContinuousMixtureCheck {
    double mean_f = 0.0;
    double mean_f_se = 0.0;
    double max_abs_error = 0.0;      // |Tg - f| at the sampled points, with the empirical mean
    double negative_fraction = 0.0;  // share of samples where g < 0
};

/// Continuous mu given by a sampler: E f is estimated, then Tg = f is checked
/// at fresh sample points using the same empirical measure.
inline ContinuousMixtureCheck bernoulli_mixture_continuous(double p, const std::function<double(RandomStream&)>& sample_mu,
                                                           const std::function<double(double)>& f, std::size_t n,
                                                           std::uint64_t seed) {
    if (!(p > 0 && p < 1)) throw InvalidInput("p must lie in (0,1)");
    if (n < 2) throw InvalidInput("need at least two samples");
    RandomStream rng(seed, stream_id(0x6d78, 2));
    std::vector<double> xs(n);
    double sum = 0.0, sumsq = 0.0;
    for (auto& x : xs) {
        x = sample_mu(rng);
        double v = f(x);
        sum += v;
        sumsq += v * v;
    }
    ContinuousMixtureCheck out;
    out.mean_f = sum / static_cast<double>(n);
    double var = std::max(0.0, sumsq / static_cast<double>(n) - out.mean_f * out.mean_f);
    out.mean_f_se = std::sqrt(var / static_cast<double>(n));
    auto g = [&](double x) { return (f(x) - out.mean_f) / p + out.mean_f; };
    double mean_g = 0.0;
    std::size_t negatives = 0;
    for (double x : xs) {
        mean_g += g(x);
        if (g(x) < 0) ++negatives;
    }
    mean_g /= static_cast<double>(n);
    for (double x : xs) out.max_abs_error = std::max(out.max_abs_error, std::fabs(p * g(x) + (1 - p) * mean_g - f(x)));
    out.negative_fraction = static_cast<double>(negatives) / static_cast<double>(n);
    return out;
}

/// Window law: given Y = y, X is uniform on A_y.
struct Cor2Law {
    enum class NuMode { Density, DiscreteRationals };
    NuMode nu_mode = NuMode::Density;
};

/// A_y = [{y} - 2^{-floor y}, {y} + 2^{-floor y}] intersected with [0, 1].
/// The right endpoint is dropped (half-open), which changes nothing in measure.
inline IntervalSet cor2_windows(const Cor2Law&, const Rational& y) {
    if (y < 0) throw InvalidInput("y must be nonnegative");
    BigInt whole = boost::multiprecision::numerator(y) / boost::multiprecision::denominator(y);
    if (whole > 4096) throw RangeError("floor(y) too large for an exact window");
    const int n = static_cast<int>(whole);
    Rational frac = y - Rational(whole);
    Rational w = pow2_inv(n);
    Rational lo = std::max(Rational(0), Rational(frac - w));
    Rational hi = std::min(Rational(1), Rational(frac + w));
    return IntervalSet(lo, hi);
}

struct Cor2Witness {
    bool found = false;
    int n = 0;
    Rational center;
    Rational y;            // y = n + center, so A_y is the window found
    Rational ratio;        // lambda(A cap A_y) / lambda(A_y)
};

/// Searches dyadic windows of half-width 2^{-n} centred on the grid of step
/// 2^{-(n+2)} for one in which A has relative density above delta.
inline Cor2Witness cor2_check(const Cor2Law& law, const IntervalSet& A, const Rational& delta, int n_max = 40) {
    if (!(A.length() > 0)) throw InvalidInput("A must have positive length");
    if (!(delta > Rational(1, 2) && delta < 1)) throw InvalidInput("delta must lie in (1/2, 1)");
    Cor2Witness out;
    for (int n = 1; n <= n_max; ++n) {
        const Rational step = pow2_inv(n + 2);
        for (const auto& part : A.intervals()) {
            // Probe the grid point nearest the component midpoint and the first one inside it.
            BigInt first;
            {
                Rational q = part.lo / step;
                first = boost::multiprecision::numerator(q) / boost::multiprecision::denominator(q);
                if (Rational(first) < q) first += 1;
            }
            Rational mid = (part.lo + part.hi) / 2;
            BigInt mid_idx;
            {
                Rational q = mid / step;
                mid_idx = boost::multiprecision::numerator(q) / boost::multiprecision::denominator(q);
            }
            std::vector<BigInt> candidates{mid_idx, first};
            for (const auto& idx : candidates) {
                Rational c = Rational(idx) * step;
                if (!(c >= 0 && c < 1)) continue;
                Rational y = Rational(n) + c;
                IntervalSet window = cor2_windows(law, y);
                Rational ratio = A.intersect(window).length() / window.length();
                if (ratio > delta) {
                    out.found = true;
                    out.n = n;
                    out.center = c;
                    out.y = y;
                    out.ratio = ratio;
                    return out;
                }
            }
        }
    }
    return out;
}

} // namespace condrep
