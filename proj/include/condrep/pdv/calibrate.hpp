#pragma once

#include <Eigen/Dense>

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
#include "condrep/measures.hpp"
#include "condrep/pdv/nnls.hpp"
#include "condrep/pdv/particles.hpp"
#include "condrep/pdv/surface.hpp"
#include "condrep/representation.hpp"

namespace condrep::pdv {

enum class Feasibility { exact, least_squares };

inline const char* to_string(Feasibility f) { return f == Feasibility::exact ? "exact" : "least-squares"; }

struct StepCalibration {
    // Occupied x-bins, ordered by their mean x.
    std::vector<std::uint32_t> x_labels;
    std::vector<double> x_rep, mu, f;
    std::vector<std::size_t> x_count;
    // Occupied y-bins.
    std::vector<std::uint32_t> y_labels;
    std::vector<double> nu, sigma2;
    std::vector<std::size_t> y_count;
    std::vector<double> sigma2_by_label;  // NaN on empty labels

    Feasibility feasibility = Feasibility::least_squares;
    double residual = 0.0;  // sum_i mu_i ((M sigma2)_i - f_i)^2
    double max_gap = 0.0;   // max_i |(M sigma2)_i - f_i|
    bool lp_feasible = false;
    std::vector<double> certificate;  // Farkas vector when the LP is infeasible
};

struct CalibrateOptions {
    bool product_law = false;  // replace the empirical joint by the product of its marginals
    double tol = 1e-10;        // absolute tolerance on M g = f
};

/// Solves E[sigma^2(Y) | X-bin] = locvar(x-bin) on the empirical law of
/// (x-bin, y-bin). When an exact nonnegative solution exists, returns the one
/// closest to `prior` in L2(nu); otherwise the same selection among the
/// nonnegative least-squares minimisers of ||M g - f||_mu.
inline StepCalibration calibrate_step(const ParticleCloud& cloud, const std::function<double(double)>& locvar,
                                      const Labels& xbins, const Labels& ybins, const std::vector<double>& prior = {},
                                      const CalibrateOptions& opt = {}) {
    const std::size_t N = cloud.size();
    if (N == 0) throw EmptyCloud("calibration needs at least one particle");
    if (xbins.of.size() != N || ybins.of.size() != N) throw DimensionMismatch("labels must cover every particle");
    if (!prior.empty() && prior.size() != ybins.count) throw DimensionMismatch("prior needs one value per y-bin");

    double total = 0;
    std::vector<double> xm(xbins.count, 0.0), xs(xbins.count, 0.0), ym(ybins.count, 0.0);
    std::vector<std::size_t> xc(xbins.count, 0), yc(ybins.count, 0);
    for (std::size_t i = 0; i < N; ++i) {
        total += cloud.w[i];
        xm[xbins.of[i]] += cloud.w[i];
        xs[xbins.of[i]] += cloud.w[i] * cloud.x[i];
        ym[ybins.of[i]] += cloud.w[i];
        ++xc[xbins.of[i]];
        ++yc[ybins.of[i]];
    }
    if (!(total > 0)) throw EmptyCloud("particle weights sum to zero");

    StepCalibration out;
    std::vector<std::uint32_t> xl;
    for (std::uint32_t b = 0; b < xbins.count; ++b)
        if (xc[b] && xm[b] > 0) xl.push_back(b);
    std::sort(xl.begin(), xl.end(), [&](auto a, auto b) { return xs[a] / xm[a] < xs[b] / xm[b]; });
    std::vector<std::int64_t> row(xbins.count, -1), col(ybins.count, -1);
    for (std::size_t r = 0; r < xl.size(); ++r) {
        row[xl[r]] = static_cast<std::int64_t>(r);
        out.x_labels.push_back(xl[r]);
        out.x_rep.push_back(xs[xl[r]] / xm[xl[r]]);
        out.x_count.push_back(xc[xl[r]]);
    }
    for (std::uint32_t b = 0; b < ybins.count; ++b)
        if (yc[b] && ym[b] > 0) {
            col[b] = static_cast<std::int64_t>(out.y_labels.size());
            out.y_labels.push_back(b);
            out.y_count.push_back(yc[b]);
        }
    const std::size_t I = out.x_labels.size(), J = out.y_labels.size();

    Matrix<double> P(I, J, 0.0);
    if (opt.product_law) {
        for (std::size_t r = 0; r < I; ++r)
            for (std::size_t c = 0; c < J; ++c) P(r, c) = (xm[out.x_labels[r]] / total) * (ym[out.y_labels[c]] / total);
    } else {
        for (std::size_t i = 0; i < N; ++i)
            P(static_cast<std::size_t>(row[xbins.of[i]]), static_cast<std::size_t>(col[ybins.of[i]])) += cloud.w[i] / total;
    }
    std::vector<double> ylab(J);
    for (std::size_t c = 0; c < J; ++c) ylab[c] = out.y_labels[c];
    DiscreteJoint<double> dj(out.x_rep, ylab, P, 1e-9);
    out.mu = dj.mu();
    out.nu = dj.nu();

    out.f.resize(I);
    for (std::size_t r = 0; r < I; ++r) {
        out.f[r] = locvar(out.x_rep[r]);
        if (!(out.f[r] >= 0) || !std::isfinite(out.f[r])) throw InvalidInput("local variance must be finite and nonnegative");
    }

    const auto Mk = kernel_x_given(dj).rows;
    Eigen::MatrixXd M(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J));
    for (std::size_t r = 0; r < I; ++r)
        for (std::size_t c = 0; c < J; ++c) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = Mk(r, c);
    Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(out.f.data(), static_cast<Eigen::Index>(I));
    Eigen::VectorXd nu = Eigen::Map<const Eigen::VectorXd>(out.nu.data(), static_cast<Eigen::Index>(J));
    Eigen::VectorXd mu = Eigen::Map<const Eigen::VectorXd>(out.mu.data(), static_cast<Eigen::Index>(I));
    Eigen::VectorXd g0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(J));
    if (!prior.empty())
        for (std::size_t c = 0; c < J; ++c) g0[static_cast<Eigen::Index>(c)] = std::max(0.0, prior[out.y_labels[c]]);

    // The simplex decides feasibility. Weighted NNLS gives the least-squares
    // fit when it fails; its residual is then a Farkas vector by the KKT
    // conditions (M' D r <= 0, r' D f = |r|_D^2 > 0), used when the simplex
    // gives up or returns an unverified certificate.
    std::optional<FeasibilityResult<double>> lp;
    try {
        lp = solve_nonneg(dj, out.f, opt.tol);
    } catch (const DomainError&) {
    }
    Eigen::VectorXd fallback, target = f;
    if (lp && lp->feasible && lp->verified) {
        out.lp_feasible = true;
        out.feasibility = Feasibility::exact;
        fallback = Eigen::Map<const Eigen::VectorXd>(lp->g.data(), static_cast<Eigen::Index>(J));
    } else {
        Eigen::VectorXd sw = mu.cwiseSqrt();
        auto ls = nnls(sw.asDiagonal() * M, sw.cwiseProduct(f));
        fallback = ls.x;
        const Eigen::VectorXd r = f - M * ls.x;
        if (!lp && r.cwiseAbs().maxCoeff() <= opt.tol) {
            out.lp_feasible = true;
            out.feasibility = Feasibility::exact;
        } else {
            if (lp && !lp->feasible && lp->verified) {
                out.certificate = lp->cert;
            } else {
                const Eigen::VectorXd y = mu.cwiseProduct(r) / mu.dot(r.cwiseProduct(r));
                out.certificate.assign(y.data(), y.data() + y.size());
            }
            target = M * ls.x;
            out.feasibility = Feasibility::least_squares;
        }
    }
    auto sel = closest_nonneg(M, target, nu, g0);
    Eigen::VectorXd g = sel.g;
    if (!(sel.max_gap <= opt.tol) || !g.allFinite()) g = fallback;

    Eigen::VectorXd gap = M * g - f;
    out.sigma2.assign(g.data(), g.data() + g.size());
    for (auto& v : out.sigma2) v = std::max(v, 0.0);
    out.residual = mu.dot(gap.cwiseProduct(gap));
    out.max_gap = gap.cwiseAbs().maxCoeff();
    if (out.feasibility == Feasibility::exact && out.max_gap > opt.tol) out.feasibility = Feasibility::least_squares;
    out.sigma2_by_label.assign(ybins.count, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < J; ++c) out.sigma2_by_label[out.y_labels[c]] = out.sigma2[c];
    return out;
}

struct SlvCalibration {
    std::vector<std::uint32_t> x_labels;
    std::vector<double> x_rep, mass, denom, leverage2;
    std::vector<double> leverage2_by_label;  // NaN on empty labels
};

/// l^2(x-bin) = locvar(x-bin) / E[phi(Z)^2 | x-bin].
inline SlvCalibration calibrate_slv_step(const ParticleCloud& cloud, const std::function<double(double)>& locvar,
                                         const Labels& xbins, const std::function<double(double)>& phi,
                                         double floor = 1e-12) {
    const std::size_t N = cloud.size();
    if (N == 0) throw EmptyCloud("calibration needs at least one particle");
    if (cloud.z.size() != N) throw InvalidInput("leverage calibration needs a factor value per particle");
    std::vector<double> p2(N), one(N, 1.0);
    for (std::size_t i = 0; i < N; ++i) {
        const double v = phi(cloud.z[i]);
        p2[i] = v * v;
    }
    const auto den = estimate_cond_exp(cloud.w, p2, xbins);
    const auto xr = estimate_cond_exp(cloud.w, cloud.x, xbins);
    SlvCalibration out;
    out.leverage2_by_label.assign(xbins.count, std::numeric_limits<double>::quiet_NaN());
    for (std::uint32_t b = 0; b < xbins.count; ++b) {
        if (!den.value[b]) continue;
        const double d = *den.value[b];
        if (!(d > floor))
            throw DegenerateDenominator("E[phi(Z)^2 | X] = " + std::to_string(d) + " in x-bin " + std::to_string(b));
        const double lv = locvar(*xr.value[b]);
        if (!(lv >= 0)) throw InvalidInput("local variance must be nonnegative");
        out.x_labels.push_back(b);
        out.x_rep.push_back(*xr.value[b]);
        out.mass.push_back(den.mass[b]);
        out.denom.push_back(d);
        out.leverage2.push_back(lv / d);
        out.leverage2_by_label[b] = lv / d;
    }
    return out;
}

struct RepricePoint {
    double t = 0, x = 0, model = 0, market = 0, se = 0;
};

/// Monte Carlo call prices of the cloud against one maturity row of a surface.
inline std::vector<RepricePoint> reprice(const ParticleCloud& cloud, const CallSurface& market, std::size_t k) {
    std::vector<RepricePoint> out;
    double w2 = 0;
    for (double w : cloud.w) w2 += w * w;
    for (std::size_t j = 0; j < market.strikes.size(); ++j) {
        const double K = market.strikes[j];
        double m = 0, m2 = 0;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const double p = std::max(cloud.x[i] - K, 0.0);
            m += cloud.w[i] * p;
            m2 += cloud.w[i] * p * p;
        }
        out.push_back({market.times[k], K, m, market.C(k, j), std::sqrt(std::max(0.0, m2 - m * m) * w2)});
    }
    return out;
}

enum class YMode { features, x_refine, independent };

struct CalibrationConfig {
    LocalVolGrid locvar;
    std::optional<CallSurface> market;
    FeatureSpec features;
    std::size_t particles = 100000;
    std::size_t steps = 50;
    double h = 0.02;
    std::size_t xbins = 40;
    std::size_t ybins1 = 20, ybins2 = 20;
    YMode ymode = YMode::features;
    std::uint64_t seed = 7;
    EulerUpdate update = EulerUpdate::multiplicative;
    double S0 = 1.0;
    double tol = 1e-10;
};

struct StepRecord {
    std::size_t k = 0;
    double t = 0;
    StepCalibration cal;
    std::size_t clipped = 0;  // y-bins whose feature-implied sigma was negative
    double mean_x = 0, mean_x_se = 0;  // before the step
};

struct CalibrationReport {
    std::vector<StepRecord> steps;
    std::vector<RepricePoint> reprice;
    double final_mean_x = 0, final_mean_x_se = 0;
};

/// y-labels for the configured mode at step k.
inline Labels y_labels_for(const ParticleCloud& cloud, const CalibrationConfig& cfg, std::size_t k) {
    const std::size_t N = cloud.size();
    switch (cfg.ymode) {
    case YMode::x_refine:
        return quantile_labels(cloud.x, cfg.ybins1);
    case YMode::independent: {
        Labels L;
        L.count = cfg.ybins1 * std::max<std::size_t>(1, cfg.ybins2);
        L.of.resize(N);
        parallel_for(N, [&](std::size_t i) {
            RandomStream rs(cfg.seed, stream_id(k + (std::uint64_t{1} << 40), i));
            L.of[i] = static_cast<std::uint32_t>(rs.below(L.count));
        });
        return L;
    }
    case YMode::features:
    default: {
        std::vector<double> r1(N), r2(N);
        for (std::size_t i = 0; i < N; ++i) {
            r1[i] = cloud.R1(i, cfg.features);
            r2[i] = cloud.R2(i, cfg.features);
        }
        auto a = quantile_labels(r1, cfg.ybins1);
        if (cfg.ybins2 <= 1) return a;
        return product_labels(a, quantile_labels(r2, cfg.ybins2));
    }
    }
}

/// Feature-implied variance at the mean features of each y-bin.
inline std::vector<double> feature_prior(const ParticleCloud& cloud, const FeatureSpec& spec, const Labels& y,
                                         std::size_t* clipped) {
    std::vector<double> r1(cloud.size()), r2(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        r1[i] = cloud.R1(i, spec);
        r2[i] = cloud.R2(i, spec);
    }
    const auto e1 = estimate_cond_exp(cloud.w, r1, y), e2 = estimate_cond_exp(cloud.w, r2, y);
    std::vector<double> prior(y.count, 0.0);
    for (std::size_t b = 0; b < y.count; ++b) {
        if (!e1.value[b]) continue;
        bool c = false;
        const double s = spec.sigma(*e1.value[b], *e2.value[b], &c);
        if (c && clipped) ++*clipped;
        prior[b] = s * s;
    }
    return prior;
}

inline void validate(const CalibrationConfig& cfg) {
    cfg.features.validate();
    if (cfg.particles == 0) throw EmptyCloud("particle count must be positive");
    if (!(cfg.h > 0)) throw InvalidInput("h must be positive");
    if (cfg.xbins == 0 || cfg.ybins1 == 0) throw InvalidInput("bin counts must be positive");
    if (cfg.locvar.times.empty() || cfg.locvar.strikes.empty()) throw InvalidInput("local variance grid is empty");
}

/// Alternates calibrate_step and step_simulate for k = 0..K-1; sigma^2(kh, .)
/// is fixed from the law at time kh before the cloud moves. Reprices at every
/// surface maturity that coincides with a simulated time.
inline CalibrationReport run_calibration(const CalibrationConfig& cfg) {
    validate(cfg);
    CalibrationReport rep;
    if (cfg.steps == 0) return rep;
    auto cloud = ParticleCloud::initial(cfg.particles, cfg.S0);
    CalibrateOptions opt;
    opt.product_law = cfg.ymode == YMode::independent;
    opt.tol = cfg.tol;
    std::vector<double> sigma2(cfg.particles);
    for (std::size_t k = 0; k < cfg.steps; ++k) {
        StepRecord rec;
        rec.k = k;
        rec.t = static_cast<double>(k) * cfg.h;
        std::tie(rec.mean_x, rec.mean_x_se) = cloud.mean_x();
        const auto xl = quantile_labels(cloud.x, cfg.xbins);
        const auto yl = y_labels_for(cloud, cfg, k);
        const auto prior = feature_prior(cloud, cfg.features, yl, &rec.clipped);
        const double t = rec.t;
        rec.cal = calibrate_step(cloud, [&](double x) { return cfg.locvar.at(t, x); }, xl, yl, prior, opt);
        for (std::size_t i = 0; i < cfg.particles; ++i) sigma2[i] = rec.cal.sigma2_by_label[yl.of[i]];
        step_simulate(cloud, cfg.features, sigma2, cfg.h, cfg.seed, k, cfg.update);
        rep.steps.push_back(std::move(rec));
        if (cfg.market) {
            const double tn = static_cast<double>(k + 1) * cfg.h;
            for (std::size_t q = 0; q < cfg.market->times.size(); ++q)
                if (std::fabs(cfg.market->times[q] - tn) <= 1e-9 * std::max(1.0, tn)) {
                    auto pts = reprice(cloud, *cfg.market, q);
                    rep.reprice.insert(rep.reprice.end(), pts.begin(), pts.end());
                }
        }
    }
    std::tie(rep.final_mean_x, rep.final_mean_x_se) = cloud.mean_x();
    return rep;
}

struct SlvConfig {
    LocalVolGrid locvar;
    std::optional<CallSurface> market;
    FactorDynamics factor;
    std::function<double(double)> phi = [](double z) { return std::sqrt(std::max(z, 0.0)); };
    std::size_t particles = 100000;
    std::size_t steps = 50;
    double h = 0.02;
    std::size_t xbins = 40;
    std::uint64_t seed = 7;
    double S0 = 1.0;
};

struct SlvReport {
    std::vector<SlvCalibration> steps;
    std::vector<RepricePoint> reprice;
};

/// Particle calibration of the leverage function, step by step.
inline SlvReport run_slv(const SlvConfig& cfg) {
    cfg.factor.validate();
    if (!(cfg.h > 0)) throw InvalidInput("h must be positive");
    SlvReport rep;
    if (cfg.steps == 0) return rep;
    auto cloud = ParticleCloud::initial(cfg.particles, cfg.S0, cfg.factor.z0);
    FeatureSpec spec;
    std::vector<double> sigma2(cfg.particles);
    for (std::size_t k = 0; k < cfg.steps; ++k) {
        const double t = static_cast<double>(k) * cfg.h;
        const auto xl = quantile_labels(cloud.x, cfg.xbins);
        auto cal = calibrate_slv_step(cloud, [&](double x) { return cfg.locvar.at(t, x); }, xl, cfg.phi);
        for (std::size_t i = 0; i < cfg.particles; ++i) {
            const double p = cfg.phi(cloud.z[i]);
            sigma2[i] = cal.leverage2_by_label[xl.of[i]] * p * p;
        }
        step_simulate(cloud, spec, sigma2, cfg.h, cfg.seed, k, EulerUpdate::multiplicative, &cfg.factor);
        rep.steps.push_back(std::move(cal));
        if (cfg.market) {
            const double tn = static_cast<double>(k + 1) * cfg.h;
            for (std::size_t q = 0; q < cfg.market->times.size(); ++q)
                if (std::fabs(cfg.market->times[q] - tn) <= 1e-9 * std::max(1.0, tn)) {
                    auto pts = reprice(cloud, *cfg.market, q);
                    rep.reprice.insert(rep.reprice.end(), pts.begin(), pts.end());
                }
        }
    }
    return rep;
}

} // namespace condrep::pdv
