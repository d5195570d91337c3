#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "condrep/error.hpp"
#include "condrep/parallel.hpp"
#include "condrep/rng.hpp"

namespace condrep::pdv {

/// Decay rates of the four return accumulators, the mixing weights of R1 and
/// R2, and sigma = beta0 + beta1 R1 + beta2 sqrt(R2).
struct FeatureSpec {
    double lambda10 = 10.0, lambda11 = 1.0, lambda20 = 10.0, lambda21 = 1.0;
    double theta1 = 0.5, theta2 = 0.5;
    double beta0 = 0.2, beta1 = 0.0, beta2 = 0.0;

    void validate() const {
        for (double l : {lambda10, lambda11, lambda20, lambda21})
            if (!(l > 0) || !std::isfinite(l)) throw InvalidInput("decay rates must be positive");
        for (double t : {theta1, theta2})
            if (!(t >= 0 && t <= 1)) throw InvalidInput("theta must lie in [0,1]");
        for (double b : {beta0, beta1, beta2})
            if (!std::isfinite(b)) throw InvalidInput("beta must be finite");
    }

    /// Feature-implied volatility, clipped at 0; `clipped` is set when it was negative.
    double sigma(double R1, double R2, bool* clipped = nullptr) const {
        const double s = beta0 + beta1 * R1 + beta2 * std::sqrt(std::max(R2, 0.0));
        if (s < 0) {
            if (clipped) *clipped = true;
            return 0.0;
        }
        return s;
    }
};

/// Optional stochastic volatility factor for the leverage model:
/// dZ = kappa (theta - Z) dt + xi sqrt(Z) dB, d<B,W> = rho dt (full-truncation Euler).
struct FactorDynamics {
    double kappa = 1.0, theta = 0.04, xi = 0.3, rho = -0.5, z0 = 0.04;

    void validate() const {
        if (!(kappa >= 0 && theta >= 0 && xi >= 0 && z0 >= 0)) throw InvalidInput("factor parameters must be nonnegative");
        if (!(rho >= -1 && rho <= 1)) throw InvalidInput("rho must lie in [-1,1]");
    }
};

/// Structure-of-arrays particle system. Weights sum to 1.
struct ParticleCloud {
    std::vector<double> x, r1a, r1b, r2a, r2b, z, w;

    std::size_t size() const noexcept { return x.size(); }

    static ParticleCloud initial(std::size_t N, double S0, std::optional<double> z0 = std::nullopt) {
        if (N == 0) throw EmptyCloud("particle count must be positive");
        if (!(S0 > 0)) throw InvalidInput("S0 must be positive");
        ParticleCloud c;
        c.x.assign(N, S0);
        c.r1a.assign(N, 0.0);
        c.r1b.assign(N, 0.0);
        c.r2a.assign(N, 0.0);
        c.r2b.assign(N, 0.0);
        if (z0) c.z.assign(N, *z0);
        c.w.assign(N, 1.0 / static_cast<double>(N));
        return c;
    }

    double R1(std::size_t i, const FeatureSpec& s) const { return (1 - s.theta1) * r1a[i] + s.theta1 * r1b[i]; }
    double R2(std::size_t i, const FeatureSpec& s) const { return (1 - s.theta2) * r2a[i] + s.theta2 * r2b[i]; }

    /// Weighted mean and its standard error (effective sample size from the weights).
    std::pair<double, double> mean_x() const {
        double m = 0, m2 = 0, w2 = 0;
        for (std::size_t i = 0; i < size(); ++i) {
            m += w[i] * x[i];
            m2 += w[i] * x[i] * x[i];
            w2 += w[i] * w[i];
        }
        const double var = std::max(0.0, m2 - m * m);
        return {m, std::sqrt(var * w2)};
    }
};

enum class EulerUpdate { multiplicative, additive };

struct StepStats {
    std::size_t particles = 0;
};

/// One Euler step. sigma2[i] is the variance applied to particle i over [kh, (k+1)h].
/// Draws come from the stream (seed, step, particle), so the result does not
/// depend on the thread count. Each accumulator decays exactly and then adds
/// lambda * r (returns) or lambda * r^2 (squared returns), r = dX / X.
inline StepStats step_simulate(ParticleCloud& cloud, const FeatureSpec& spec, const std::vector<double>& sigma2, double h,
                               std::uint64_t seed, std::uint64_t step, EulerUpdate update = EulerUpdate::multiplicative,
                               const FactorDynamics* factor = nullptr) {
    spec.validate();
    const std::size_t N = cloud.size();
    if (N == 0) throw EmptyCloud("cannot step an empty cloud");
    if (!(h > 0) || !std::isfinite(h)) throw InvalidInput("step size must be positive");
    if (sigma2.size() != N) throw DimensionMismatch("one variance per particle expected");
    if (factor && cloud.z.size() != N) throw DimensionMismatch("factor dynamics need a z value per particle");
    const double e10 = std::exp(-spec.lambda10 * h), e11 = std::exp(-spec.lambda11 * h);
    const double e20 = std::exp(-spec.lambda20 * h), e21 = std::exp(-spec.lambda21 * h);
    for (double v : sigma2)
        if (!(v >= 0)) throw InvalidInput("variances must be nonnegative");
    const double sh = std::sqrt(h);
    std::vector<unsigned char> bad(N, 0);
    parallel_for(N, [&](std::size_t i) {
        RandomStream rs(seed, stream_id(step, i));
        const double dW = sh * rs.normal();
        const double sig = std::sqrt(sigma2[i]);
        const double x0 = cloud.x[i];
        double r;
        if (update == EulerUpdate::multiplicative) {
            r = sig * dW;
            cloud.x[i] = x0 * (1 + r);
        } else {
            cloud.x[i] = x0 + sig * dW;
            r = sig * dW / x0;
        }
        cloud.r1a[i] = e10 * cloud.r1a[i] + spec.lambda10 * r;
        cloud.r1b[i] = e11 * cloud.r1b[i] + spec.lambda11 * r;
        cloud.r2a[i] = e20 * cloud.r2a[i] + spec.lambda20 * r * r;
        cloud.r2b[i] = e21 * cloud.r2b[i] + spec.lambda21 * r * r;
        if (factor) {
            const double dB = factor->rho * dW + std::sqrt(1 - factor->rho * factor->rho) * sh * rs.normal();
            const double zp = std::max(cloud.z[i], 0.0);
            cloud.z[i] += factor->kappa * (factor->theta - zp) * h + factor->xi * std::sqrt(zp) * dB;
        }
        if (!std::isfinite(cloud.x[i]) || !std::isfinite(r * r)) bad[i] = 1;
    });
    for (std::size_t i = 0; i < N; ++i)
        if (bad[i]) throw NonFiniteState("particle " + std::to_string(i) + " left the finite state space");
    return {N};
}

/// Per-particle bin labels in [0, count).
struct Labels {
    std::vector<std::uint32_t> of;
    std::size_t count = 0;
};

/// Bins [-inf, e_1), [e_1, e_2), ..., [e_{n-1}, inf) with e_k the value at
/// sorted position floor(k N / n). Ties collapse bins, which then stay empty.
/// The edges for n bins are a subset of those for any multiple of n.
inline Labels quantile_labels(const std::vector<double>& v, std::size_t nbins, std::vector<double>* edges_out = nullptr) {
    if (nbins == 0) throw InvalidInput("bin count must be positive");
    const std::size_t N = v.size();
    std::vector<double> sorted(v);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    for (std::size_t k = 1; k < nbins && N; ++k) edges.push_back(sorted[k * N / nbins]);
    Labels L;
    L.count = nbins;
    L.of.resize(N);
    for (std::size_t i = 0; i < N; ++i)
        L.of[i] = static_cast<std::uint32_t>(std::upper_bound(edges.begin(), edges.end(), v[i]) - edges.begin());
    if (edges_out) *edges_out = std::move(edges);
    return L;
}

/// Labels of fixed edges (bins as in quantile_labels).
inline Labels edge_labels(const std::vector<double>& v, const std::vector<double>& edges) {
    Labels L;
    L.count = edges.size() + 1;
    L.of.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        L.of[i] = static_cast<std::uint32_t>(std::upper_bound(edges.begin(), edges.end(), v[i]) - edges.begin());
    return L;
}

/// Cartesian product label a * b.count + b.
inline Labels product_labels(const Labels& a, const Labels& b) {
    if (a.of.size() != b.of.size()) throw DimensionMismatch("label vectors differ in length");
    Labels L;
    L.count = a.count * b.count;
    L.of.resize(a.of.size());
    for (std::size_t i = 0; i < a.of.size(); ++i)
        L.of[i] = static_cast<std::uint32_t>(a.of[i] * b.count + b.of[i]);
    return L;
}

struct BinEstimate {
    std::vector<double> mass;                 // total weight per bin
    std::vector<std::size_t> count;           // particles per bin
    std::vector<std::optional<double>> value; // weighted average, empty bins missing
};

/// Weighted within-bin averages of `values`.
inline BinEstimate estimate_cond_exp(const std::vector<double>& w, const std::vector<double>& values, const Labels& bins) {
    if (w.size() != values.size() || w.size() != bins.of.size()) throw DimensionMismatch("weights, values and labels differ in length");
    BinEstimate e;
    e.mass.assign(bins.count, 0.0);
    e.count.assign(bins.count, 0);
    std::vector<double> sum(bins.count, 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        e.mass[bins.of[i]] += w[i];
        sum[bins.of[i]] += w[i] * values[i];
        ++e.count[bins.of[i]];
    }
    e.value.resize(bins.count);
    for (std::size_t b = 0; b < bins.count; ++b)
        if (e.count[b] && e.mass[b] > 0) e.value[b] = sum[b] / e.mass[b];
    return e;
}

/// Nadaraya-Watson estimate with a Gaussian kernel at the given points.
inline std::vector<double> estimate_cond_exp_kernel(const std::vector<double>& w, const std::vector<double>& x,
                                                    const std::vector<double>& values, const std::vector<double>& at,
                                                    double bandwidth) {
    if (w.size() != x.size() || x.size() != values.size()) throw DimensionMismatch("weights, positions and values differ in length");
    if (!(bandwidth > 0)) throw InvalidInput("bandwidth must be positive");
    std::vector<double> out(at.size());
    parallel_for(at.size(), [&](std::size_t q) {
        double num = 0, den = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double u = (x[i] - at[q]) / bandwidth;
            const double k = w[i] * std::exp(-0.5 * u * u);
            num += k * values[i];
            den += k;
        }
        out[q] = den > 0 ? num / den : std::numeric_limits<double>::quiet_NaN();
    });
    return out;
}

} // namespace condrep::pdv
