#include <gtest/gtest.h>

#include "condrep/operators.hpp"
#include "condrep/representation.hpp"
#include "fixtures.hpp"

using namespace condrep;
using condrep::testing::R;

namespace {

std::vector<Rational> unit_vector(std::size_t n, std::size_t i) {
    std::vector<Rational> e(n, R(0));
    e[i] = R(1);
    return e;
}

Rational dot(const std::vector<Rational>& a, const std::vector<Rational>& b) {
    Rational s(0);
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

} // namespace

TEST(FindTau, PatternMatrix) {
    auto tau = find_tau(condrep::testing::pattern_joint());
    ASSERT_TRUE(tau);
    EXPECT_EQ(tau->tau, (std::vector<std::size_t>{1, 0, 3, 5}));
}

TEST(FindTau, SingleAtomAndProductLaw) {
    auto single = find_tau(DiscreteJoint<Rational>(Matrix<Rational>{{R(1)}}));
    ASSERT_TRUE(single);
    EXPECT_EQ(single->tau, std::vector<std::size_t>{0});
    EXPECT_FALSE(find_tau(condrep::testing::product_joint({R(1, 2), R(1, 2)}, {R(1, 3), R(2, 3)})));
}

TEST(FindTau, SmallestAdmissibleColumn) {
    DiscreteJoint<Rational> dj(Matrix<Rational>{{R(0), R(1, 4), R(1, 4)}, {R(1, 2), R(0), R(0)}});
    EXPECT_EQ(find_tau(dj)->tau, (std::vector<std::size_t>{1, 0}));
}

TEST(ConditionD, Examples) {
    EXPECT_TRUE(check_condition_D(condrep::testing::pattern_joint()));
    EXPECT_FALSE(check_condition_D(condrep::testing::product_joint({R(1, 2), R(1, 2)}, {R(1, 2), R(1, 2)})));
    DiscreteJoint<Rational> dj(Matrix<Rational>{{R(1, 2), R(0)}, {R(1, 4), R(1, 4)}});
    EXPECT_EQ(dirac_set(dj), std::vector<std::size_t>{1});
    EXPECT_FALSE(check_condition_D(dj));
}

TEST(ConditionD, EqualsTauExistence) {
    RandomStream rng(31, 0);
    for (int t = 0; t < 200; ++t) {
        auto dj = condrep::testing::random_joint(rng, 1 + rng.below(5), 1 + rng.below(7), 0.55);
        EXPECT_EQ(check_condition_D(dj), find_tau(dj).has_value());
    }
}

TEST(ConstructG, SingleAtom) {
    DiscreteJoint<Rational> dj(Matrix<Rational>{{R(1)}});
    EXPECT_EQ(construct_g_dirac(dj, {R(7, 3)}), std::vector<Rational>{R(7, 3)});
}

TEST(ConstructG, IndicatorOfFirstRowUsesItsPrivateColumn) {
    auto dj = condrep::testing::pattern_joint();
    auto g = construct_g_dirac(dj, unit_vector(4, 0));
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_EQ(g[j] != 0, j == 1) << j;
    EXPECT_EQ(apply_T(dj, g), unit_vector(4, 0));
}

TEST(ConstructG, ExactSolutionAndMassIdentity) {
    RandomStream rng(32, 0);
    for (int t = 0; t < 30; ++t) {
        auto dj = condrep::testing::random_planted_joint(rng, 1 + rng.below(5), 7);
        std::vector<Rational> f(dj.I());
        for (auto& v : f) v = R(static_cast<long>(rng.below(20)), 1 + static_cast<long>(rng.below(6)));
        auto g = construct_g_dirac(dj, f);
        EXPECT_EQ(apply_T(dj, g), f);
        EXPECT_EQ(dot(dj.nu(), g), dot(dj.mu(), f));
        for (const auto& v : g) EXPECT_GE(v, 0);
    }
}

TEST(ConstructG, RejectsViolatedCondition) {
    auto dj = condrep::testing::product_joint({R(1, 2), R(1, 2)}, {R(1, 2), R(1, 2)});
    EXPECT_THROW(construct_g_dirac(dj, {R(1), R(0)}), ConditionDViolated);
    EXPECT_THROW(construct_g_dirac(condrep::testing::pattern_joint(), {R(1)}), DimensionMismatch);
}

TEST(SolveNonneg, FeasibleUnderConditionD) {
    auto dj = condrep::testing::pattern_joint();
    std::vector<Rational> f{R(1), R(2), R(0), R(1, 3)};
    auto res = solve_nonneg(dj, f);
    ASSERT_TRUE(res.feasible);
    EXPECT_TRUE(res.verified);
    EXPECT_EQ(apply_T(dj, res.g), f);
    EXPECT_EQ(dot(dj.nu(), res.g), dot(dj.mu(), f));
    std::size_t positive = 0;
    for (const auto& v : res.g) positive += v > 0;
    EXPECT_LE(positive, dj.I());  // basic solution
}

TEST(SolveNonneg, ProductLawIsInfeasibleWithCertificate) {
    auto dj = condrep::testing::product_joint({R(1, 2), R(1, 2)}, {R(1, 4), R(3, 4)});
    auto res = solve_nonneg(dj, unit_vector(2, 0));
    ASSERT_FALSE(res.feasible);
    EXPECT_TRUE(res.verified);
    auto M = kernel_x_given(dj).rows;
    for (std::size_t j = 0; j < dj.J(); ++j) EXPECT_LE(res.cert[0] * M(0, j) + res.cert[1] * M(1, j), 0);
    EXPECT_EQ(dot(res.cert, unit_vector(2, 0)), 1);
}

TEST(SolveNonneg, BernoulliMixtureIndicatorIsInfeasible) {
    auto bm = BernoulliMixture<Rational>::uniform(R(1, 2), 4);
    auto res = solve_nonneg(bm.joint(), {R(1), R(0), R(1), R(0)});
    EXPECT_FALSE(res.feasible);
    EXPECT_TRUE(res.verified);
}

TEST(SolveNonneg, ScalingInvariance) {
    RandomStream rng(33, 0);
    for (int t = 0; t < 40; ++t) {
        auto dj = condrep::testing::random_joint(rng, 1 + rng.below(4), 1 + rng.below(6), 0.5);
        std::vector<Rational> f(dj.I());
        for (auto& v : f) v = R(static_cast<long>(rng.below(5)));
        auto a = solve_nonneg(dj, f);
        std::vector<Rational> cf = f;
        for (auto& v : cf) v *= R(7, 3);
        auto b = solve_nonneg(dj, cf);
        EXPECT_EQ(a.feasible, b.feasible);
        EXPECT_TRUE(a.verified);
        EXPECT_TRUE(b.verified);
        if (a.feasible) {
            std::vector<Rational> cg = a.g;
            for (auto& v : cg) v *= R(7, 3);
            EXPECT_EQ(apply_T(dj, cg), cf);
        }
    }
}

TEST(SolveNonneg, FloatModeAgreesWithExact) {
    RandomStream rng(34, 0);
    for (int t = 0; t < 40; ++t) {
        auto dj = condrep::testing::random_joint(rng, 1 + rng.below(4), 1 + rng.below(6), 0.5);
        Matrix<double> P(dj.I(), dj.J());
        for (std::size_t i = 0; i < dj.I(); ++i)
            for (std::size_t j = 0; j < dj.J(); ++j) P(i, j) = to_double(dj.P()(i, j));
        DiscreteJoint<double> fj(P);
        for (std::size_t i = 0; i < dj.I(); ++i) {
            std::vector<double> e(dj.I(), 0.0);
            e[i] = 1.0;
            auto exact = solve_nonneg(dj, unit_vector(dj.I(), i));
            auto approx = solve_nonneg(fj, e, 1e-9);
            EXPECT_EQ(exact.feasible, approx.feasible);
            EXPECT_TRUE(approx.verified);
        }
    }
}

TEST(SolveNonneg, DimensionMismatch) {
    EXPECT_THROW(solve_nonneg(condrep::testing::pattern_joint(), {R(1)}), DimensionMismatch);
}

TEST(DecideRplus, Examples) {
    auto yes = decide_Rplus(condrep::testing::pattern_joint());
    EXPECT_TRUE(yes.rplus);
    EXPECT_TRUE(yes.agrees);
    auto no = decide_Rplus(condrep::testing::product_joint({R(1, 2), R(1, 2)}, {R(1, 2), R(1, 2)}));
    EXPECT_FALSE(no.rplus);
    EXPECT_TRUE(no.agrees);
    EXPECT_EQ(no.failing_rows.size(), 2u);
    EXPECT_TRUE(no.all_verified);
}

TEST(DecideRplus, AgreesWithTauOnRandomFourBySix) {
    RandomStream rng(35, 0);
    for (int t = 0; t < 50; ++t) {
        auto dj = t % 2 ? condrep::testing::random_planted_joint(rng, 4, 6)
                        : condrep::testing::random_joint(rng, 4, 6, 0.6);
        auto rep = decide_Rplus(dj);
        EXPECT_TRUE(rep.agrees);
        EXPECT_TRUE(rep.all_verified);
    }
}

TEST(CheckNecessary, ProductLawFails) {
    auto dj = condrep::testing::product_joint({R(1, 2), R(1, 2)}, {R(1, 2), R(1, 2)});
    auto rep = check_necessary(dj, {0});
    EXPECT_FALSE(rep.holds);
    EXPECT_FALSE(rep.vacuous);
    EXPECT_THROW(check_necessary(dj, {}), EmptyA);
}

TEST(CheckNecessary, PatternMatrixHoldsForEverySubset) {
    auto dj = condrep::testing::pattern_joint();
    for (unsigned mask = 1; mask < 16; ++mask) {
        std::vector<std::size_t> A;
        for (std::size_t i = 0; i < 4; ++i)
            if (mask & (1u << i)) A.push_back(i);
        auto rep = check_necessary(dj, A);
        EXPECT_TRUE(rep.holds);
        EXPECT_EQ(rep.dirac, (std::vector<std::size_t>{0, 1, 3, 5}));
    }
}

TEST(CheckNecessary, ImpliedByRplusOnRandomInstances) {
    RandomStream rng(36, 0);
    for (int t = 0; t < 60; ++t) {
        auto dj = condrep::testing::random_joint(rng, 1 + rng.below(5), 1 + rng.below(7), 0.6);
        if (!decide_Rplus(dj).rplus) continue;
        for (unsigned mask = 1; mask < (1u << dj.I()); ++mask) {
            std::vector<std::size_t> A;
            for (std::size_t i = 0; i < dj.I(); ++i)
                if (mask & (1u << i)) A.push_back(i);
            EXPECT_TRUE(check_necessary(dj, A).holds);
        }
    }
}

TEST(CheckNecessary, FailureRefutesRepresentability) {
    // Whenever the necessary condition fails for some A, the LP must find
    // some indicator that is not representable.
    RandomStream rng(37, 0);
    for (int t = 0; t < 60; ++t) {
        auto dj = condrep::testing::random_joint(rng, 2 + rng.below(4), 1 + rng.below(7), 0.5);
        bool refuted = false;
        for (unsigned mask = 1; mask < (1u << dj.I()) && !refuted; ++mask) {
            std::vector<std::size_t> A;
            for (std::size_t i = 0; i < dj.I(); ++i)
                if (mask & (1u << i)) A.push_back(i);
            refuted = !check_necessary(dj, A).holds;
        }
        if (refuted) EXPECT_FALSE(decide_Rplus(dj).rplus);
    }
}

// Near-diagonal particle-style kernel: each row spreads over a narrow band of
// many columns, the shape that makes plain Bland pricing crawl in floating point.
TEST(SolveNonneg, FloatBandedKernelIsFastAndVerified) {
    const std::size_t I = 40, J = 400;
    RandomStream rng(17, 0);
    Matrix<double> P(I, J, 0.0);
    double total = 0;
    for (std::size_t j = 0; j < J; ++j) {
        const double centre = static_cast<double>(j) * I / J;
        for (std::size_t i = 0; i < I; ++i) {
            const double d = static_cast<double>(i) - centre;
            if (std::fabs(d) < 3) {
                P(i, j) = std::exp(-d * d) * (0.5 + rng.uniform());
                total += P(i, j);
            }
        }
    }
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j) P(i, j) /= total;
    std::vector<double> xs(I), ys(J);
    for (std::size_t i = 0; i < I; ++i) xs[i] = static_cast<double>(i);
    for (std::size_t j = 0; j < J; ++j) ys[j] = static_cast<double>(j);
    DiscreteJoint<double> dj(xs, ys, P, 1e-9);
    std::vector<double> f(I);
    for (std::size_t i = 0; i < I; ++i) f[i] = 0.04 * (1 + 0.1 * std::sin(static_cast<double>(i)));
    auto res = solve_nonneg(dj, f, 1e-10);
    ASSERT_TRUE(res.feasible);
    EXPECT_TRUE(res.verified);
    EXPECT_LE(res.residual, 1e-10);
}
