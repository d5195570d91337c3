#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "condrep/error.hpp"
#include "condrep/interval_set.hpp"
#include "condrep/parallel.hpp"
#include "condrep/rational.hpp"
#include "condrep/rng.hpp"

// The law on [0,1]^2 whose second marginal has density 15 on the bands
// [2^-m - 4^-(m+1), 2^-m - 4^-(2m+1)), m >= 1, and where given Y = y in band m,
// X is a_m(y) or b_m(y) = a_m(y) + 4^-m with probability 1/2 each. Bands are
// taken half-open, so a_m maps band m onto [0, 1 - 4^-m) and b_m onto [4^-m, 1).
namespace condrep::counterexample {

inline Rational band_lo(int m) { return pow2_inv(m) - pow4_inv(m + 1); }
inline Rational band_hi(int m) { return pow2_inv(m) - pow4_inv(2 * m + 1); }

/// nu-mass of band m.
inline Rational band_mass(int m) { return Rational(15) * (band_hi(m) - band_lo(m)); }

inline Rational a_m(int m, const Rational& y) { return Rational(pow_int(4, m + 1)) * (y - pow2_inv(m)) + 1; }
inline Rational b_m(int m, const Rational& y) { return a_m(m, y) + pow4_inv(m); }
inline Rational a_m_inv(int m, const Rational& x) { return pow2_inv(m) + (x - 1) * pow4_inv(m + 1); }
inline Rational b_m_inv(int m, const Rational& x) { return a_m_inv(m, x - pow4_inv(m)); }

/// Band index containing y, or 0 when y lies between bands (or m > m_cap).
inline int band_of(const Rational& y, int m_cap = 200) {
    if (!(y > 0) || y >= Rational(1, 2)) return 0;
    for (int m = 1; m <= m_cap; ++m) {
        if (y >= band_lo(m)) return y < band_hi(m) ? m : 0;
    }
    return 0;
}

inline Rational nu_density(const Rational& y) {
    if (y < 0 || y > 1) throw DomainError("y must lie in [0,1]");
    return band_of(y) ? Rational(15) : Rational(0);
}

namespace detail {
// Smallest m >= 1 with 4^-m <= t (t > 0).
inline int first_power_below(const Rational& t) {
    int m = 1;
    while (pow4_inv(m) > t) ++m;
    return m;
}
// Smallest m >= 1 with 4^-m < t (t > 0).
inline int first_power_strictly_below(const Rational& t) {
    int m = 1;
    while (pow4_inv(m) >= t) ++m;
    return m;
}
} // namespace detail

/// Density of X, exact: 5/2 (4^-ma + 4^-mb) where ma is the first band whose
/// a-branch reaches x and mb the first band whose b-branch reaches x.
inline Rational f_mu(const Rational& x) {
    if (x < 0 || x > 1) throw DomainError("x must lie in [0,1]");
    Rational total(0);
    if (x < 1) total += pow4_inv(detail::first_power_strictly_below(1 - x));
    if (x > 0) total += pow4_inv(detail::first_power_below(x));
    return Rational(5, 2) * total;
}

struct TruncatedValue {
    Rational value;
    Rational tail_bound;  // upper bound on the omitted terms
};

/// The density written as 5/4 on [1/4,3/4) plus 5/8 (1 + 4^-m) on the two
/// mirrored shells [4^-(m+1), 4^-m) and [1 - 4^-m, 1 - 4^-(m+1)), m <= m_max.
/// Points closer to 0 or 1 than 4^-(m_max+1) get value 0 and a tail bound.
inline TruncatedValue f_mu_truncated(const Rational& x, int m_max) {
    if (x < 0 || x > 1) throw DomainError("x must lie in [0,1]");
    TruncatedValue out{Rational(0), Rational(0)};
    if (x >= Rational(1, 4) && x < Rational(3, 4)) {
        out.value = Rational(5, 4);
        return out;
    }
    for (int m = 1; m <= m_max; ++m) {
        bool left = x >= pow4_inv(m + 1) && x < pow4_inv(m);
        bool right = x >= 1 - pow4_inv(m) && x < 1 - pow4_inv(m + 1);
        if (left || right) {
            out.value = Rational(5, 8) * (1 + pow4_inv(m));
            return out;
        }
    }
    out.tail_bound = Rational(5, 8) * (1 + pow4_inv(m_max + 1));
    return out;
}

/// Integral of the truncated density over [0,1], exact.
inline Rational f_mu_truncated_integral(int m_max) {
    Rational total = Rational(5, 4) * Rational(1, 2);
    for (int m = 1; m <= m_max; ++m)
        total += 2 * Rational(5, 8) * (1 + pow4_inv(m)) * (pow4_inv(m) - pow4_inv(m + 1));
    return total;
}

/// Sum of the band masses for m <= m_max, exact.
inline Rational nu_truncated_integral(int m_max) {
    Rational total(0);
    for (int m = 1; m <= m_max; ++m) total += band_mass(m);
    return total;
}

/// Distribution function of X, exact closed form.
inline Rational mu_cdf(const Rational& x) {
    if (x <= 0) return Rational(0);
    if (x >= 1) return Rational(1);
    const Rational c(15, 2);
    // a-branches: sum_m 4^-(m+1) min(x, 1 - 4^-m).
    Rational a(0);
    int Ma = detail::first_power_below(1 - x);
    for (int m = 1; m < Ma; ++m) a += (1 - pow4_inv(m)) * pow4_inv(m + 1);
    a += x * pow4_inv(Ma) / 3;
    // b-branches: sum_m 4^-(m+1) max(0, x - 4^-m).
    int Mb = detail::first_power_below(x);
    Rational b = x * pow4_inv(Mb) / 3 - Rational(16, 15) * pow4_inv(2 * Mb + 1);
    return c * (a + b);
}

inline Rational mu_measure(const IntervalSet& s) {
    Rational total(0);
    for (const auto& p : s.intervals()) total += mu_cdf(p.hi) - mu_cdf(p.lo);
    return total;
}

struct Atom {
    int band;
    bool b_branch;
    Rational y;
    Rational weight;
};

struct ConditionalLaw {
    std::vector<Atom> atoms;
    Rational tail;  // 1 - sum of listed weights; mass carried by bands > m_max
    Rational tail_bound;
};

/// Atom mass of pi_{X=x} at a_m^{-1}(x) or b_m^{-1}(x) when the branch reaches x.
inline Rational atom_weight(int m, const Rational& fx) { return Rational(15, 2) * pow4_inv(m + 1) / fx; }

inline ConditionalLaw pi_x_given(const Rational& x, int m_max) {
    if (!(x > 0 && x < 1)) throw DomainError("x must lie in the open interval (0,1)");
    if (m_max < 3) throw RangeError("m_max must be at least 3");
    const Rational fx = f_mu(x);
    ConditionalLaw law;
    Rational total(0);
    for (int m = 1; m <= m_max; ++m) {
        const Rational w = atom_weight(m, fx);
        if (x < 1 - pow4_inv(m)) {
            law.atoms.push_back({m, false, a_m_inv(m, x), w});
            total += w;
        }
        if (x >= pow4_inv(m)) {
            law.atoms.push_back({m, true, b_m_inv(m, x), w});
            total += w;
        }
    }
    law.tail = 1 - total;
    law.tail_bound = Rational(15) * pow4_inv(m_max + 1) / 3 / fx;
    return law;
}

/// Cell I_m^k = [k alpha_m, (k+1) alpha_m) with alpha_m = 2 * 4^-m.
inline Rational alpha(int m) { return 2 * pow4_inv(m); }
inline IntervalSet cell(int m, const BigInt& k) {
    return IntervalSet(Rational(k) * alpha(m), Rational(k + 1) * alpha(m));
}

inline BigInt max_cell_index(int m) { return pow_int(4, static_cast<unsigned>(m)) / 2 - 3; }

inline void check_cell(int m, const BigInt& k) {
    if (m < 3) throw RangeError("m must be at least 3");
    if (k < 2 || k > max_cell_index(m))
        throw RangeError("cell index " + k.str() + " outside {2, ..., 4^m/2 - 3} for m = " + std::to_string(m));
}

/// Half-cell swap R on I_m^k applied to a subset of the cell.
inline IntervalSet half_cell_swap(const IntervalSet& s, int m, const BigInt& k) {
    const Rational lo = Rational(k) * alpha(m);
    const Rational mid = lo + alpha(m) / 2;
    const Rational hi = lo + alpha(m);
    IntervalSet left = s.intersect(IntervalSet(lo, mid));
    IntervalSet right = s.intersect(IntervalSet(mid, hi));
    return left.translate(alpha(m) / 2).unite(right.translate(-alpha(m) / 2));
}

/// One piece of g: on the y-set a_m^{-1}(x_left) inside band m, g equals
/// weight. x_left lies in the left half of one admissible cell.
struct AtlasPiece {
    int band = 0;
    BigInt cell_index;
    IntervalSet x_left;
    Rational weight;

    IntervalSet y_set() const {
        std::vector<Interval> parts;
        for (const auto& p : x_left.intervals()) parts.push_back({a_m_inv(band, p.lo), a_m_inv(band, p.hi)});
        return IntervalSet(std::move(parts));
    }
};

/// g as a finite sum of constant pieces on subsets of the bands.
struct WeightedAtlas {
    std::vector<AtlasPiece> pieces;

    bool empty() const { return pieces.empty(); }

    void append(const WeightedAtlas& other, const Rational& scale = Rational(1)) {
        for (auto p : other.pieces) {
            p.weight *= scale;
            pieces.push_back(std::move(p));
        }
    }

    Rational g(const Rational& y) const {
        int m = band_of(y);
        if (m == 0) return Rational(0);
        const Rational x = a_m(m, y);
        Rational total(0);
        for (const auto& p : pieces)
            if (p.band == m && p.x_left.contains(x)) total += p.weight;
        return total;
    }

    /// E[g(Y) | X = x], exact: only the atoms a_m^{-1}(x), b_m^{-1}(x) of the
    /// bands carrying pieces can contribute.
    Rational apply_T(const Rational& x) const {
        if (!(x > 0 && x < 1)) throw DomainError("x must lie in the open interval (0,1)");
        const Rational fx = f_mu(x);
        Rational total(0);
        for (const auto& p : pieces) {
            const Rational w = atom_weight(p.band, fx);
            if (x < 1 - pow4_inv(p.band) && p.x_left.contains(x)) total += p.weight * w;
            if (x >= pow4_inv(p.band) && p.x_left.contains(x - pow4_inv(p.band))) total += p.weight * w;
        }
        return total;
    }

    /// Integral of g against nu.
    Rational nu_l1() const {
        Rational total(0);
        for (const auto& p : pieces) total += p.weight * 15 * p.x_left.length() * pow4_inv(p.band + 1);
        return total;
    }

    /// The x-set on which T g is one: every piece covers its left set and the
    /// mirrored right set.
    IntervalSet covered() const {
        IntervalSet out;
        for (const auto& p : pieces) out = out.unite(p.x_left).unite(p.x_left.translate(pow4_inv(p.band)));
        return out;
    }
};

struct SousSolution {
    IntervalSet Amk;
    WeightedAtlas g;
};

/// Covering step on a single cell: keeps the part of A in I_m^k that is
/// invariant under the half-cell swap and pairs each left point with its
/// mirror through one y in band m.
inline SousSolution soussolution(const IntervalSet& A, int m, const BigInt& k) {
    check_cell(m, k);
    const IntervalSet c = cell(m, k);
    const IntervalSet S = A.intersect(c);
    SousSolution out;
    out.Amk = S.intersect(half_cell_swap(S, m, k));
    const Rational lo = Rational(k) * alpha(m);
    IntervalSet left = out.Amk.intersect(IntervalSet(lo, lo + alpha(m) / 2));
    if (!left.empty()) {
        // f_mu is constant on the cell, so the atom mass and hence g is too.
        const Rational weight = 1 / atom_weight(m, f_mu(lo));
        out.g.pieces.push_back({m, k, std::move(left), weight});
    }
    return out;
}

struct IndicatorRepresentation {
    WeightedAtlas g;
    IntervalSet covered;
    IntervalSet remainder;
    int iterations = 0;
    std::vector<Rational> remainder_history;  // lambda(remainder) after each iteration
    Rational worst_ratio;                      // max over iterations of new/old remainder length
};

/// Band chosen for a remainder component of length L: the coarsest m >= 3
/// whose cells satisfy alpha_m <= L / 8.
inline int band_for_length(const Rational& L) {
    int m = 3;
    while (alpha(m) > L / 8) ++m;
    return m;
}

/// Iterated covering of A until the uncovered part has length <= target.
inline IndicatorRepresentation represent_indicator(const IntervalSet& A, const Rational& target_resid,
                                                   int max_iterations = 600) {
    if (!(target_resid > 0)) throw InvalidInput("target residual must be positive");
    IndicatorRepresentation rep;
    rep.remainder = A;
    rep.worst_ratio = Rational(0);
    while (rep.remainder.length() > target_resid && rep.iterations < max_iterations) {
        const Rational before = rep.remainder.length();
        IntervalSet next = rep.remainder;
        for (const auto& comp : rep.remainder.intervals()) {
            const IntervalSet piece(comp.lo, comp.hi);
            const int m = band_for_length(comp.length());
            const Rational a = alpha(m);
            Rational q = comp.lo / a;
            BigInt k0 = boost::multiprecision::numerator(q) / boost::multiprecision::denominator(q);
            q = comp.hi / a;
            BigInt k1 = boost::multiprecision::numerator(q) / boost::multiprecision::denominator(q);
            k0 = std::max(k0, BigInt(2));
            k1 = std::min(k1, max_cell_index(m));
            for (BigInt k = k0; k <= k1; ++k) {
                auto step = soussolution(piece, m, k);
                if (step.Amk.empty()) continue;
                next = next.subtract(step.Amk);
                rep.covered = rep.covered.unite(step.Amk);
                rep.g.append(step.g);
            }
        }
        rep.remainder = std::move(next);
        ++rep.iterations;
        const Rational after = rep.remainder.length();
        rep.remainder_history.push_back(after);
        if (before > 0) rep.worst_ratio = std::max(rep.worst_ratio, Rational(after / before));
        if (after == before) break;  // nothing coverable remains
    }
    return rep;
}

/// Nonnegative step function sum_k c_k 1_{S_k}.
struct StepFunction {
    std::vector<std::pair<IntervalSet, Rational>> terms;

    Rational operator()(const Rational& x) const {
        Rational v(0);
        for (const auto& [s, c] : terms)
            if (s.contains(x)) v += c;
        return v;
    }

    /// Elementary intervals on which the function is constant, with values.
    std::vector<std::pair<Interval, Rational>> pieces() const {
        std::vector<Rational> cuts{Rational(0), Rational(1)};
        for (const auto& [s, c] : terms)
            for (const auto& p : s.intervals()) {
                cuts.push_back(p.lo);
                cuts.push_back(p.hi);
            }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        std::vector<std::pair<Interval, Rational>> out;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) out.push_back({{cuts[i], cuts[i + 1]}, (*this)(cuts[i])});
        return out;
    }

    Rational mu_l1() const {
        Rational total(0);
        for (const auto& [s, c] : terms) total += c * mu_measure(s);
        return total;
    }
};

struct FunctionRepresentation {
    WeightedAtlas g;
    std::vector<Rational> levels;           // h_1 < ... < h_n
    std::vector<IntervalSet> remainders;    // uncovered part of each layer
    Rational residual_l1;                   // integral of |Tg - f| d mu
    Rational mass_gap;                      // ||g||_{L1(nu)} - ||f||_{L1(mu)}
    int iterations = 0;

    /// E[g(Y) | X = x] for the assembled g.
    Rational apply_T(const Rational& x) const { return g.apply_T(x); }
};

/// Layer-cake decomposition: each level set {f >= h_t} is represented as an
/// indicator and weighted by h_t - h_{t-1}.
inline FunctionRepresentation represent_function(const StepFunction& f, const Rational& tol) {
    if (!(tol > 0)) throw InvalidInput("tol must be positive");
    for (const auto& [s, c] : f.terms)
        if (c < 0) throw InvalidInput("step function coefficients must be nonnegative");
    auto pieces = f.pieces();
    FunctionRepresentation out;
    for (const auto& [iv, v] : pieces)
        if (v > 0) out.levels.push_back(v);
    std::sort(out.levels.begin(), out.levels.end());
    out.levels.erase(std::unique(out.levels.begin(), out.levels.end()), out.levels.end());
    const auto n = static_cast<long>(out.levels.size());
    Rational prev(0);
    out.residual_l1 = 0;
    for (const auto& h : out.levels) {
        std::vector<Interval> parts;
        for (const auto& [iv, v] : pieces)
            if (v >= h) parts.push_back(iv);
        IntervalSet layer(std::move(parts));
        const Rational height = h - prev;
        // max f_mu = 5/4, so the mu-residual of the layer is <= 5/4 of its length.
        const Rational target = tol / (Rational(5, 4) * n * height);
        auto rep = represent_indicator(layer, target);
        out.g.append(rep.g, height);
        out.residual_l1 += height * mu_measure(rep.remainder);
        out.remainders.push_back(rep.remainder);
        out.iterations += rep.iterations;
        prev = h;
    }
    out.mass_gap = out.g.nu_l1() - f.mu_l1();
    return out;
}

/// Samples (X, Y) and stores X together with g(Y) evaluated in floating point.
struct MonteCarloBin {
    double lo = 0.0, hi = 0.0;
    std::size_t count = 0;
    double mean = 0.0;       // empirical E[g(Y) | X in bin]
    double se = 0.0;
    double target = 0.0;     // mu(bin cap covered) / mu(bin)
    bool within_3se = true;
};

struct MonteCarloReport {
    std::size_t samples = 0;
    std::vector<MonteCarloBin> bins;
    bool all_within_3se = true;
};

inline MonteCarloReport monte_carlo_check(const WeightedAtlas& g, std::size_t samples, std::size_t nbins,
                                          std::uint64_t seed, int m_max = 25) {
    if (nbins == 0) throw InvalidInput("need at least one bin");
    // Per band: sorted left-half x-intervals with weights.
    struct Seg { double lo, hi, w; };
    std::map<int, std::vector<Seg>> segs;
    for (const auto& p : g.pieces)
        for (const auto& iv : p.x_left.intervals())
            segs[p.band].push_back({to_double(iv.lo), to_double(iv.hi), to_double(p.weight)});
    for (auto& [m, v] : segs) std::sort(v.begin(), v.end(), [](const Seg& a, const Seg& b) { return a.lo < b.lo; });

    std::vector<double> cumulative(static_cast<std::size_t>(m_max) + 1, 0.0);
    for (int m = 1; m <= m_max; ++m) cumulative[m] = cumulative[m - 1] + to_double(band_mass(m));
    const double total_mass = cumulative[m_max];

    const std::size_t chunks = 256;
    std::vector<std::vector<double>> sum(chunks, std::vector<double>(nbins, 0.0)), sumsq = sum, cnt = sum;
    parallel_chunks(samples, chunks, [&](std::size_t b, std::size_t e, std::size_t c) {
        RandomStream rng(seed, stream_id(0x6365, c));
        for (std::size_t s = b; s < e; ++s) {
            const double u = rng.uniform() * total_mass;
            int m = static_cast<int>(std::upper_bound(cumulative.begin() + 1, cumulative.end(), u) - cumulative.begin());
            m = std::min(m, m_max);
            const double span = 1.0 - std::ldexp(1.0, -2 * m);
            const double xa = rng.uniform() * span;  // a_m(Y) is uniform on [0, 1 - 4^-m)
            const bool take_b = rng.uniform() < 0.5;
            const double x = take_b ? xa + std::ldexp(1.0, -2 * m) : xa;
            double gy = 0.0;
            if (auto it = segs.find(m); it != segs.end()) {
                const auto& v = it->second;
                auto pos = std::upper_bound(v.begin(), v.end(), xa, [](double t, const Seg& sg) { return t < sg.lo; });
                if (pos != v.begin() && xa < std::prev(pos)->hi) gy = std::prev(pos)->w;
            }
            auto bin = std::min(nbins - 1, static_cast<std::size_t>(x * static_cast<double>(nbins)));
            sum[c][bin] += gy;
            sumsq[c][bin] += gy * gy;
            cnt[c][bin] += 1.0;
        }
    });

    MonteCarloReport rep;
    rep.samples = samples;
    const IntervalSet covered = g.covered();
    for (std::size_t k = 0; k < nbins; ++k) {
        double s = 0, s2 = 0, n = 0;
        for (std::size_t c = 0; c < chunks; ++c) {
            s += sum[c][k];
            s2 += sumsq[c][k];
            n += cnt[c][k];
        }
        MonteCarloBin bin;
        const Rational lo(static_cast<long>(k), static_cast<long>(nbins)), hi(static_cast<long>(k + 1), static_cast<long>(nbins));
        bin.lo = to_double(lo);
        bin.hi = to_double(hi);
        bin.count = static_cast<std::size_t>(n);
        const IntervalSet B(lo, hi);
        bin.target = to_double(mu_measure(B.intersect(covered)) / mu_measure(B));
        if (n > 0) {
            bin.mean = s / n;
            const double var = n > 1 ? std::max(0.0, (s2 - n * bin.mean * bin.mean) / (n - 1)) : 0.0;
            bin.se = std::sqrt(var / n);
            bin.within_3se = std::fabs(bin.mean - bin.target) <= 3.0 * bin.se + 1e-12;
        }
        rep.all_within_3se = rep.all_within_3se && bin.within_3se;
        rep.bins.push_back(bin);
    }
    return rep;
}

} // namespace condrep::counterexample
