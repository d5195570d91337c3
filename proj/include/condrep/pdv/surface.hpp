#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "condrep/error.hpp"
#include "condrep/matrix.hpp"
#include "condrep/parallel.hpp"

namespace condrep::pdv {

/// Black-Scholes call with zero rates; t = 0 or sigma = 0 gives the payoff.
inline double bs_call(double S, double x, double t, double sigma) {
    if (x <= 0) return S - x;
    if (t <= 0 || sigma <= 0) return std::max(S - x, 0.0);
    const double sd = sigma * std::sqrt(t);
    const double d1 = (std::log(S / x) + 0.5 * sd * sd) / sd;
    const double d2 = d1 - sd;
    auto N = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    return S * N(d1) - x * N(d2);
}

/// Parametric arbitrage-free call surfaces.
///   flat:      constant volatility sigma
///   term:      instantaneous variance a + b t (a > 0, a + b t >= 0 on the grid)
///   displaced: X + d is a geometric Brownian motion with volatility sigma,
///              local volatility sigma (x + d) / x
struct VolModel {
    enum class Kind { flat, term, displaced } kind = Kind::flat;
    double S0 = 1.0;
    double sigma = 0.2;
    double a = 0.04, b = 0.0;
    double d = 0.0;

    static VolModel flat(double sigma, double S0 = 1.0) {
        VolModel m;
        m.kind = Kind::flat;
        m.sigma = sigma;
        m.S0 = S0;
        return m;
    }
    static VolModel term(double a, double b, double S0 = 1.0) {
        VolModel m;
        m.kind = Kind::term;
        m.a = a;
        m.b = b;
        m.S0 = S0;
        return m;
    }
    static VolModel displaced(double sigma, double d, double S0 = 1.0) {
        VolModel m;
        m.kind = Kind::displaced;
        m.sigma = sigma;
        m.d = d;
        m.S0 = S0;
        return m;
    }

    double call(double t, double x) const {
        switch (kind) {
        case Kind::flat:
            return bs_call(S0, x, t, sigma);
        case Kind::term: {
            if (t <= 0) return std::max(S0 - x, 0.0);
            const double w = a * t + 0.5 * b * t * t;
            if (w < 0) throw InvalidInput("term-structure variance turns negative");
            return bs_call(S0, x, t, std::sqrt(w / t));
        }
        case Kind::displaced:
            return bs_call(S0 + d, x + d, t, sigma);
        }
        return 0.0;
    }

    /// Closed-form local variance (the Dupire value of this surface).
    double locvar(double t, double x) const {
        switch (kind) {
        case Kind::flat: return sigma * sigma;
        case Kind::term: return a + b * t;
        case Kind::displaced: {
            const double v = sigma * (x + d) / x;
            return v * v;
        }
        }
        return 0.0;
    }

    void validate() const {
        if (!(S0 > 0)) throw InvalidInput("S0 must be positive");
        if (kind != Kind::term && !(sigma > 0)) throw InvalidInput("sigma must be positive");
        if (kind == Kind::term && !(a > 0)) throw InvalidInput("term model needs a > 0");
        if (kind == Kind::displaced && !(S0 + d > 0)) throw InvalidInput("displacement must keep S0 + d positive");
    }
};

/// Call prices on a time x strike grid, row k = maturity times[k].
struct CallSurface {
    std::vector<double> times;
    std::vector<double> strikes;
    Matrix<double> C;
    double spot = 1.0;

    double at(std::size_t k, std::size_t j) const { return C(k, j); }
};

inline void check_grid(const std::vector<double>& g, const char* what, bool allow_zero) {
    if (g.empty()) throw InvalidInput(std::string(what) + " grid is empty");
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i]) || g[i] < 0 || (!allow_zero && g[i] == 0))
            throw InvalidInput(std::string(what) + " grid has an invalid entry");
        if (i && !(g[i - 1] < g[i])) throw InvalidInput(std::string(what) + " grid must be strictly increasing");
    }
}

inline CallSurface synth_call_surface(const VolModel& model, std::vector<double> times, std::vector<double> strikes) {
    model.validate();
    check_grid(times, "time", true);
    check_grid(strikes, "strike", false);
    if (model.kind == VolModel::Kind::displaced && strikes.front() + model.d <= 0)
        throw InvalidInput("displacement must keep every strike + d positive");
    CallSurface s{std::move(times), std::move(strikes), {}, model.S0};
    s.C = Matrix<double>(s.times.size(), s.strikes.size());
    for (std::size_t k = 0; k < s.times.size(); ++k)
        for (std::size_t j = 0; j < s.strikes.size(); ++j) s.C(k, j) = model.call(s.times[k], s.strikes[j]);
    return s;
}

/// Uniform grid lo, lo + step, ..., up to hi (inclusive within rounding).
inline std::vector<double> linspace_step(double lo, double hi, double step) {
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
    for (std::size_t i = 0; i <= n; ++i) g.push_back(lo + static_cast<double>(i) * step);
    return g;
}

/// Finite-difference weights for the d-th derivative at z on arbitrary nodes.
inline std::vector<double> fd_weights(double z, const std::vector<double>& nodes, int d) {
    const std::size_t n = nodes.size();
    std::vector<std::vector<double>> c(n, std::vector<double>(d + 1, 0.0));
    double c1 = 1.0, c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const int mn = std::min<int>(static_cast<int>(i), d);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[i] - z;
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = c[i][d];
    return w;
}

struct LocalVolGrid {
    std::vector<double> times;
    std::vector<double> strikes;
    Matrix<double> locvar;
    Matrix<unsigned char> computed;  // 1 where the Dupire ratio was evaluated, 0 where filled
    std::size_t floored = 0;         // negative numerators set to 0
    std::size_t filled = 0;          // cells copied from a neighbour

    /// Bilinear lookup, clamped to the grid.
    double at(double t, double x) const {
        auto bracket = [](const std::vector<double>& g, double v, std::size_t& i0, double& w) {
            if (v <= g.front() || g.size() == 1) { i0 = 0; w = 0; return; }
            if (v >= g.back()) { i0 = g.size() - 2; w = 1; return; }
            i0 = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), v) - g.begin()) - 1;
            w = (v - g[i0]) / (g[i0 + 1] - g[i0]);
        };
        std::size_t k, j;
        double wt, wx;
        bracket(times, t, k, wt);
        bracket(strikes, x, j, wx);
        auto row = [&](std::size_t kk) {
            if (strikes.size() == 1) return locvar(kk, 0);
            return (1 - wx) * locvar(kk, j) + wx * locvar(kk, j + 1);
        };
        if (times.size() == 1) return row(0);
        return (1 - wt) * row(k) + wt * row(k + 1);
    }
};

/// Black-Scholes implied volatility of a zero-rate call; nullopt when the
/// time value is too small to carry information.
inline std::optional<double> implied_vol(double S, double x, double t, double C, double min_time_value = 1e-12) {
    if (!(t > 0)) return std::nullopt;
    const double intrinsic = std::max(S - x, 0.0);
    if (!(C - intrinsic > min_time_value * S) || !(C < S)) return std::nullopt;
    double lo = 1e-8, hi = 1.0;
    while (bs_call(S, x, t, hi) < C) {
        hi *= 2;
        if (hi > 1e3) return std::nullopt;
    }
    double v = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double c = bs_call(S, x, t, v);
        if (c > C) hi = v;
        else lo = v;
        // Newton step when it stays inside the bracket, bisection otherwise.
        const double sd = v * std::sqrt(t);
        const double d1 = (std::log(S / x) + 0.5 * sd * sd) / sd;
        const double vega = S * std::sqrt(t) * std::exp(-0.5 * d1 * d1) / std::sqrt(2 * 3.14159265358979323846);
        double next = vega > 0 ? v - (c - C) / vega : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - v) <= 1e-15 * v || hi - lo <= 1e-15 * hi) return next;
        v = next;
    }
    return v;
}

enum class DupireForm { implied_variance, price };

struct DupireOptions {
    DupireForm form = DupireForm::implied_variance;
    std::size_t stencil = 5;        // nodes per derivative stencil (3 or 5)
    double density_floor = 1e-3;    // price form: relative to the row maximum of d2C/dx2
    double min_time_value = 1e-10;  // implied form: relative to spot
    double arbitrage_tol = 1e-9;    // butterfly tolerance relative to max C / dx^2
};

namespace detail {

inline std::size_t stencil_start(std::size_t i, std::size_t len, std::size_t width) {
    width = std::min(width, len);
    std::size_t lo = i >= width / 2 ? i - width / 2 : 0;
    if (lo + width > len) lo = len - width;
    return lo;
}

// Fill uncomputed cells from the nearest computed strike in the row, then
// rows without any computed cell from the nearest computed row.
inline void fill_gaps(LocalVolGrid& g) {
    const std::size_t K = g.times.size(), n = g.strikes.size();
    std::vector<bool> row_ok(K, false);
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<std::size_t> ok;
        for (std::size_t j = 0; j < n; ++j)
            if (g.computed(k, j)) ok.push_back(j);
        if (ok.empty()) continue;
        row_ok[k] = true;
        for (std::size_t j = 0; j < n; ++j) {
            if (g.computed(k, j)) continue;
            auto it = std::lower_bound(ok.begin(), ok.end(), j);
            std::size_t src;
            if (it == ok.end()) src = ok.back();
            else if (it == ok.begin()) src = *it;
            else src = (j - *(it - 1) <= *it - j) ? *(it - 1) : *it;
            g.locvar(k, j) = g.locvar(k, src);
            ++g.filled;
        }
    }
    if (std::none_of(row_ok.begin(), row_ok.end(), [](bool b) { return b; }))
        throw ArbitrageError("no maturity carries a usable density");
    for (std::size_t k = 0; k < K; ++k) {
        if (row_ok[k]) continue;
        std::size_t best = K;
        for (std::size_t q = 0; q < K; ++q)
            if (row_ok[q] && (best == K || (q > k ? q - k : k - q) < (best > k ? best - k : k - best))) best = q;
        for (std::size_t j = 0; j < n; ++j) g.locvar(k, j) = g.locvar(best, j);
        g.filled += n;
    }
}

inline void dupire_price_form(const CallSurface& s, const DupireOptions& opt, LocalVolGrid& g) {
    const std::size_t K = s.times.size(), n = s.strikes.size();
    // The time derivative is taken in sqrt(t), where C stays smooth down to t = 0.
    std::vector<double> sq(K);
    for (std::size_t k = 0; k < K; ++k) sq[k] = std::sqrt(s.times[k]);
    for (std::size_t k = 0; k < K; ++k) {
        if (s.times[k] <= 0) continue;
        const std::size_t t0 = stencil_start(k, K, opt.stencil), tw = std::min(opt.stencil, K);
        const auto wt = fd_weights(sq[k], std::vector<double>(sq.begin() + t0, sq.begin() + t0 + tw), 1);
        std::vector<double> dens(n, 0.0), num(n, 0.0);
        double rowmax = 0;
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const std::size_t x0 = stencil_start(j, n, opt.stencil), xw = std::min(opt.stencil, n);
            const auto wx = fd_weights(s.strikes[j], std::vector<double>(s.strikes.begin() + x0, s.strikes.begin() + x0 + xw), 2);
            for (std::size_t q = 0; q < xw; ++q) dens[j] += wx[q] * s.C(k, x0 + q);
            double ds = 0;
            for (std::size_t q = 0; q < tw; ++q) ds += wt[q] * s.C(t0 + q, j);
            num[j] = ds / (2 * sq[k]);
            rowmax = std::max(rowmax, dens[j]);
        }
        for (std::size_t j = 1; j + 1 < n; ++j) {
            if (!(dens[j] > opt.density_floor * rowmax)) continue;
            double dt = num[j];
            if (dt < 0) {
                dt = 0;
                ++g.floored;
            }
            g.locvar(k, j) = 2 * dt / (s.strikes[j] * s.strikes[j] * dens[j]);
            g.computed(k, j) = 1;
        }
    }
}

// Same ratio written in total implied variance w(t, y), y = log(x / S):
// sigma_loc^2 = dw/dt / (1 - y w_y / w + (w_y^2 / 4)(-1/4 - 1/w + y^2 / w^2) + w_yy / 2).
inline void dupire_implied_form(const CallSurface& s, const DupireOptions& opt, LocalVolGrid& g) {
    const std::size_t K = s.times.size(), n = s.strikes.size();
    Matrix<double> w(K, n, 0.0);
    Matrix<unsigned char> ok(K, n, 0);
    parallel_for(K * n, [&](std::size_t c) {
        const std::size_t k = c / n, j = c % n;
        if (s.times[k] <= 0) {
            ok(k, j) = 1;  // w(0, .) = 0
            return;
        }
        if (auto v = implied_vol(s.spot, s.strikes[j], s.times[k], s.C(k, j), opt.min_time_value)) {
            w(k, j) = *v * *v * s.times[k];
            ok(k, j) = 1;
        }
    });
    std::vector<double> y(n);
    for (std::size_t j = 0; j < n; ++j) y[j] = std::log(s.strikes[j] / s.spot);
    for (std::size_t k = 0; k < K; ++k) {
        if (s.times[k] <= 0) continue;
        const std::size_t t0 = stencil_start(k, K, opt.stencil), tw = std::min(opt.stencil, K);
        const auto wt = fd_weights(s.times[k], std::vector<double>(s.times.begin() + t0, s.times.begin() + t0 + tw), 1);
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const std::size_t x0 = stencil_start(j, n, opt.stencil), xw = std::min(opt.stencil, n);
            bool usable = true;
            for (std::size_t q = 0; q < tw; ++q) usable = usable && ok(t0 + q, j);
            for (std::size_t q = 0; q < xw; ++q) usable = usable && ok(k, x0 + q);
            if (!usable) continue;
            const std::vector<double> yn(y.begin() + x0, y.begin() + x0 + xw);
            const auto w1 = fd_weights(y[j], yn, 1), w2 = fd_weights(y[j], yn, 2);
            double wT = 0, wy = 0, wyy = 0;
            for (std::size_t q = 0; q < tw; ++q) wT += wt[q] * w(t0 + q, j);
            for (std::size_t q = 0; q < xw; ++q) {
                wy += w1[q] * w(k, x0 + q);
                wyy += w2[q] * w(k, x0 + q);
            }
            const double W = w(k, j), Y = y[j];
            const double den = 1 - Y * wy / W + 0.25 * wy * wy * (-0.25 - 1 / W + Y * Y / (W * W)) + 0.5 * wyy;
            if (!(den > 0)) continue;
            if (wT < 0) {
                wT = 0;
                ++g.floored;
            }
            g.locvar(k, j) = wT / den;
            g.computed(k, j) = 1;
        }
    }
}

} // namespace detail

/// Dupire local variances sigma_loc^2 = 2 dC/dt / (x^2 d2C/dx2) by finite
/// differences. Rows at t = 0 and cells without usable derivatives are
/// filled from neighbours; `computed` marks the evaluated cells.
inline LocalVolGrid dupire_localvol(const CallSurface& s, const DupireOptions& opt = {}) {
    check_grid(s.times, "time", true);
    check_grid(s.strikes, "strike", false);
    const std::size_t K = s.times.size(), n = s.strikes.size();
    if (s.C.rows() != K || s.C.cols() != n) throw DimensionMismatch("call grid does not match its axes");
    if (n < 3) throw InvalidInput("Dupire needs at least 3 strikes");
    if (K < 2) throw InvalidInput("Dupire needs at least 2 maturities");
    if (opt.stencil != 3 && opt.stencil != 5) throw InvalidInput("stencil must be 3 or 5");
    if (!(s.spot > 0)) throw InvalidInput("spot must be positive");

    double cmax = 0, dxmin = s.strikes[1] - s.strikes[0];
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(s.C(k, j))) throw InvalidInput("non-finite call price");
            cmax = std::max(cmax, std::fabs(s.C(k, j)));
        }
    for (std::size_t j = 1; j < n; ++j) dxmin = std::min(dxmin, s.strikes[j] - s.strikes[j - 1]);

    // Butterfly check: every call row must be convex in strike.
    const double arb = opt.arbitrage_tol * std::max(cmax, 1e-300) / (dxmin * dxmin);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const double h1 = s.strikes[j] - s.strikes[j - 1], h2 = s.strikes[j + 1] - s.strikes[j];
            const double d2 = 2 * (s.C(k, j - 1) / (h1 * (h1 + h2)) - s.C(k, j) / (h1 * h2) + s.C(k, j + 1) / (h2 * (h1 + h2)));
            if (d2 < -arb)
                throw ArbitrageError("call prices not convex in strike at t=" + std::to_string(s.times[k]) +
                                     ", x=" + std::to_string(s.strikes[j]));
        }

    LocalVolGrid g;
    g.times = s.times;
    g.strikes = s.strikes;
    g.locvar = Matrix<double>(K, n, 0.0);
    g.computed = Matrix<unsigned char>(K, n, 0);
    if (opt.form == DupireForm::price) detail::dupire_price_form(s, opt, g);
    else detail::dupire_implied_form(s, opt, g);
    detail::fill_gaps(g);
    return g;
}

} // namespace condrep::pdv
