// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "../fixtures.hpp"
#include "condrep/counterexample.hpp"
#include "condrep/mixing.hpp"
#include "condrep/operators.hpp"
#include "condrep/pdvcalib.hpp"
#include "condrep/representation.hpp"

using namespace condrep;
using condrep::testing::R;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

template <class T>
std::vector<T> apply_M(const DiscreteJoint<T>& dj, const std::vector<T>& g) {
    std::vector<T> out(dj.I(), T(0));
    for (std::size_t i = 0; i < dj.I(); ++i)
        for (std::size_t j = 0; j < dj.J(); ++j) out[i] += dj.P()(i, j) * g[j];
    for (std::size_t i = 0; i < dj.I(); ++i) out[i] /= dj.mu()[i];
    return out;
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Outcome finite_support_equivalence() {
    RandomStream rng(2024, 1);
    const auto t0 = std::chrono::steady_clock::now();
    int agree = 0, rplus = 0;
    for (int n = 0; n < 200; ++n) {
        const std::size_t I = 1 + rng.below(5), J = std::max<std::size_t>(I, 1 + rng.below(7));
        auto dj = n % 2 ? testing::random_planted_joint(rng, I, J) : testing::random_joint(rng, I, J, 0.5);
        auto rep = decide_Rplus(dj);
        const bool lp = rep.rplus && rep.all_verified;
        const bool tau = find_tau(dj).has_value();
        agree += lp == tau && rep.all_verified;
        rplus += lp;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {agree == 200 && secs < 10,
            std::to_string(agree) + "/200 agree, " + std::to_string(rplus) + " with R+, " + fmt("%.2f s", secs)};
}

Outcome constructive_g() {
    RandomStream rng(2024, 2);
    int exact = 0, total = 0;
    for (int n = 0; n < 50; ++n) {
        const std::size_t I = 2 + rng.below(4), J = I + rng.below(4);
        auto dj = testing::random_planted_joint(rng, I, J);
        if (!check_condition_D(dj)) return {false, "planted instance violates (D)"};
        for (int q = 0; q < 20; ++q) {
            std::vector<Rational> f(I);
            for (auto& v : f) v = Rational(static_cast<long>(rng.below(20)), 1 + static_cast<long>(rng.below(7)));
            auto g = construct_g_dirac(dj, f);
            Rational gn(0), fn(0);
            for (std::size_t j = 0; j < J; ++j) gn += dj.nu()[j] * g[j];
            for (std::size_t i = 0; i < I; ++i) fn += dj.mu()[i] * f[i];
            exact += apply_M(dj, g) == f && gn == fn && std::all_of(g.begin(), g.end(), [](const Rational& v) { return v >= 0; });
            ++total;
        }
    }
    return {exact == total, std::to_string(exact) + "/" + std::to_string(total) + " exact with equal L1 norms"};
}

Outcome mixture_closed_form() {
    int checked = 0, bad = 0, sets = 0;
    for (const Rational& p : {R(1, 4), R(1, 2), R(3, 4)}) {
        for (std::size_t K = 2; K <= 8; ++K) {
            auto bm = BernoulliMixture<Rational>::uniform(p, K);
            auto dj = bm.joint();
            for (std::uint32_t mask = 1; mask + 1 < (1u << K); ++mask) {
                std::vector<Rational> f(K);
                for (std::size_t k = 0; k < K; ++k) f[k] = (mask >> k & 1) ? 1 : 0;
                auto sol = bernoulli_mixture_g(bm, f);
                ++checked;
                if (apply_M(dj, sol.g) != f || bernoulli_mixture_T(bm, sol.g) != f) ++bad;
                for (std::size_t k = 0; k < K; ++k)
                    if ((sol.g[k] < 0) != !(mask >> k & 1)) ++bad;
                if (K <= 6 || mask % 7 == 0) {
                    ++sets;
                    if (solve_nonneg(dj, f).feasible) ++bad;
                }
            }
        }
    }
    return {bad == 0, std::to_string(checked) + " indicators, negative set = complement, " + std::to_string(sets) +
                          " LPs infeasible, " + std::to_string(bad) + " failures"};
}

Outcome counterexample_identities() {
    using namespace counterexample;
    const Rational tol(1, 10000000000LL);
    const Rational nu1 = nu_truncated_integral(25), f1 = f_mu_truncated_integral(25);
    const bool integrals = abs(nu1 - 1) <= tol && abs(f1 - 1) <= tol;
    const bool half = f_mu(R(1, 2)) == R(5, 4);
    RandomStream rng(2024, 4);
    int ok = 0;
    for (int t = 0; t < 100; ++t) {
        const int m = 3 + static_cast<int>(rng.below(4));
        const BigInt k = 2 + BigInt(rng.below(static_cast<std::uint64_t>(max_cell_index(m) - 1)));
        const Rational lo = Rational(k) * alpha(m);
        std::vector<Interval> parts;
        const std::size_t pieces = 1 + rng.below(4);
        for (std::size_t q = 0; q < pieces; ++q) {
            long a = static_cast<long>(rng.below(97)), b = static_cast<long>(rng.below(97));
            if (a > b) std::swap(a, b);
            Rational l = lo + alpha(m) * Rational(a - 16, 64), h = lo + alpha(m) * Rational(b - 16, 64);
            l = std::max(l, R(0));
            h = std::min(std::max(h, l), R(1));
            parts.push_back({l, h});
        }
        IntervalSet A(parts);
        auto sol = soussolution(A, m, k);
        ok += sol.Amk.length() >= 2 * A.intersect(cell(m, k)).length() - alpha(m);
    }
    return {integrals && half && ok == 100,
            "|int nu - 1| = " + fmt("%.2e", to_double(abs(nu1 - 1))) + ", |int f_mu - 1| = " +
                fmt("%.2e", to_double(abs(f1 - 1))) + ", f_mu(1/2) = " + to_string(f_mu(R(1, 2))) + ", bound " +
                std::to_string(ok) + "/100"};
}

Outcome counterexample_representation() {
    using namespace counterexample;
    const auto t0 = std::chrono::steady_clock::now();
    IntervalSet A(R(3, 10), R(2, 5));
    auto rep = represent_indicator(A, A.length() / 1000, 600);
    auto mc = monte_carlo_check(rep.g, 1000000, 64, 2024);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // Against the indicator of A itself; only bins straddling the uncovered remainder can differ.
    std::size_t occupied = 0, within = 0;
    for (const auto& b : mc.bins) {
        if (b.count == 0) continue;
        ++occupied;
        const double ind = (b.lo >= 0.3 - 1e-15 && b.hi <= 0.4 + 1e-15) ? 1.0 : (b.hi <= 0.3 || b.lo >= 0.4) ? 0.0 : b.target;
        within += std::fabs(b.mean - ind) <= 3 * b.se + 1e-15;
    }
    const bool ok = rep.remainder.length() <= A.length() / 1000 && rep.iterations <= 600 && within == occupied &&
                    mc.all_within_3se && secs < 120;
    return {ok, "remainder/lambda(A) = " + fmt("%.3e", to_double(rep.remainder.length() / A.length())) + " after " +
                    std::to_string(rep.iterations) + " iterations, " + std::to_string(within) + "/" +
                    std::to_string(occupied) + " bins within 3 SE, " + fmt("%.1f s", secs)};
}

Outcome digit_mixing() {
    using namespace mixing;
    DigitScheme scheme{R(3, 10), 12, Eta::uniform()};
    const std::vector<unsigned> ms{0, 1, 2, 5, 10};
    std::vector<std::pair<unsigned, unsigned>> pairs{{0, 1}, {1, 2}, {2, 5}, {5, 10}, {0, 10}};
    auto rep = mixing_check(scheme, IntervalSet(R(0), R(1, 2)), ms, 1000000, 2024, pairs);
    int mass = 0, inter = 0;
    for (const auto& e : rep.mass) mass += e.within_3se;
    for (const auto& e : rep.pair_mass) inter += e.within_3se;
    std::string hats;
    for (std::size_t k = 0; k < ms.size(); ++k) hats += (k ? ", " : "") + fmt("%.4f", rep.hat_mass[k].value);
    return {mass == 5 && inter == 5 && rep.trend_ok,
            "masses " + std::to_string(mass) + "/5, intersections " + std::to_string(inter) +
                "/5, eta(A_hat cap A_m) = [" + hats + "] -> 0.15"};
}

Outcome xi_criterion_check() {
    RandomStream rng(2024, 7);
    int exact = 0, inst = 0, solved = 0, surj = 0;
    double worst = 0;
    for (int n = 0; n < 30; ++n) {
        const std::size_t K = 2 + rng.below(7);
        BernoulliMixture<Rational> bm;
        bm.p = Rational(1 + static_cast<long>(rng.below(19)), 20);
        long total = 0;
        std::vector<long> w(K);
        for (auto& v : w) total += v = 1 + static_cast<long>(rng.below(9));
        for (std::size_t k = 0; k < K; ++k) {
            bm.xs.push_back(Rational(static_cast<long>(k)));
            bm.mu.push_back(Rational(w[k], total));
        }
        auto dj = bm.joint();
        auto xi = xi_criterion(dj);
        const Rational expected = bm.p + (1 - bm.p) * *std::min_element(bm.mu.begin(), bm.mu.end());
        ++inst;
        exact += xi.xi_exact == expected;
        if (!xi.surjective) continue;
        ++surj;
        for (int q = 0; q < 20; ++q) {
            std::vector<Rational> f(K);
            for (auto& v : f) v = Rational(static_cast<long>(rng.below(2001)) - 1000, 100);
            auto ls = solve_unconstrained(dj, f);
            worst = std::max(worst, ls.residual_inf);
            solved += ls.residual_inf <= 1e-10;
        }
    }
    return {exact == inst && surj > 0 && solved == 20 * surj,
            std::to_string(exact) + "/" + std::to_string(inst) + " exact xi, " + std::to_string(solved) + "/" +
                std::to_string(20 * surj) + " solves, worst residual " + fmt("%.1e", worst)};
}

Outcome pdv_flat() {
    using namespace pdv;
    const auto t0 = std::chrono::steady_clock::now();
    auto surface = synth_call_surface(VolModel::flat(0.2), linspace_step(0, 1, 0.02), linspace_step(0.3, 2.5, 0.0025));
    auto grid = dupire_localvol(surface);
    double dupire_err = 0;
    for (std::size_t k = 1; k < grid.times.size(); ++k)
        for (std::size_t j = 0; j < grid.strikes.size(); ++j)
            if (grid.computed(k, j)) dupire_err = std::max(dupire_err, std::fabs(std::sqrt(grid.locvar(k, j)) - 0.2));

    CalibrationConfig cfg;
    cfg.locvar = grid;
    cfg.market = synth_call_surface(VolModel::flat(0.2), {1.0}, linspace_step(0.8, 1.2, 0.05));
    cfg.particles = 100000;
    cfg.steps = 50;
    cfg.h = 0.02;
    cfg.xbins = 40;
    cfg.ybins1 = cfg.ybins2 = 20;
    cfg.seed = 7;
    auto rep = run_calibration(cfg);
    std::size_t feasible = 0, bins = 0, close = 0;
    for (const auto& s : rep.steps) {
        feasible += s.cal.feasibility == Feasibility::exact;
        for (std::size_t j = 0; j < s.cal.sigma2.size(); ++j)
            if (s.cal.y_count[j] >= 500) {
                ++bins;
                close += std::fabs(s.cal.sigma2[j] - 0.04) <= 0.05 * 0.04;
            }
    }
    std::size_t priced = 0;
    double worst = 0;
    for (const auto& p : rep.reprice) {
        const double z = std::fabs(p.model - p.market) / p.se;
        worst = std::max(worst, z);
        priced += z <= 3;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = dupire_err <= 0.002 && feasible == 50 && close == bins && priced == rep.reprice.size() &&
                    !rep.reprice.empty() && secs < 300;
    return {ok, "Dupire max |sigma - 0.2| = " + fmt("%.1e", dupire_err) + ", " + std::to_string(feasible) +
                    "/50 exact steps, " + std::to_string(close) + "/" + std::to_string(bins) +
                    " bins within 5%, reprice " + std::to_string(priced) + "/" + std::to_string(rep.reprice.size()) +
                    " within 3 SE (worst " + fmt("%.2f SE", worst) + "), " + fmt("%.1f s", secs)};
}

Outcome pdv_impossibility() {
    using namespace pdv;
    auto surface = synth_call_surface(VolModel::displaced(0.1, 1.0), linspace_step(0, 1, 0.02), linspace_step(0.3, 2.5, 0.0025));
    CalibrationConfig cfg;
    cfg.locvar = dupire_localvol(surface);
    cfg.steps = 50;
    cfg.h = 0.02;
    cfg.xbins = 40;
    cfg.ybins1 = 20;
    cfg.ybins2 = 1;
    cfg.ymode = YMode::independent;
    cfg.seed = 9;
    auto run = [&](std::size_t N) {
        cfg.particles = N;
        return run_calibration(cfg);
    };
    auto a = run(50000), b = run(100000);
    double worst = 0;
    std::size_t positive = 0;
    std::vector<double> ra, rb;
    for (const auto* rep : {&a, &b})
        for (const auto& s : rep->steps) {
            double m = 0, v = 0;
            for (std::size_t i = 0; i < s.cal.mu.size(); ++i) m += s.cal.mu[i] * s.cal.f[i];
            for (std::size_t i = 0; i < s.cal.mu.size(); ++i) v += s.cal.mu[i] * (s.cal.f[i] - m) * (s.cal.f[i] - m);
            worst = std::max(worst, std::fabs(s.cal.residual - v));
            positive += s.k > 0 && s.cal.residual > 0 && s.cal.feasibility == Feasibility::least_squares;
            (rep == &a ? ra : rb).push_back(s.cal.residual);
        }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    };
    const double ma = median(ra), mb = median(rb);
    const bool ok = worst <= 1e-10 && positive == 2 * (cfg.steps - 1) && mb >= 0.95 * ma;
    return {ok, "max |residual - Var_mu(f)| = " + fmt("%.1e", worst) + ", " + std::to_string(positive) + "/" +
                    std::to_string(2 * (cfg.steps - 1)) + " later steps infeasible, median residual " + fmt("%.4e", ma) +
                    " (N) vs " + fmt("%.4e", mb) + " (2N), ratio " + fmt("%.4f", mb / ma) + " >= 0.95"};
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"finite-support equivalence", finite_support_equivalence},
        {"constructive g under (D)", constructive_g},
        {"Bernoulli mixture closed form", mixture_closed_form},
        {"counterexample identities", counterexample_identities},
        {"counterexample representation", counterexample_representation},
        {"digit mixing", digit_mixing},
        {"xi criterion", xi_criterion_check},
        {"PDV flat surface", pdv_flat},
        {"PDV independent features", pdv_impossibility},
    };
    int failed = 0, n = 0;
    for (const auto& [name, run] : criteria) {
        ++n;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
