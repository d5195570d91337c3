#include <gtest/gtest.h>

#include "condrep/operators.hpp"
#include "condrep/representation.hpp"
#include "fixtures.hpp"

using namespace condrep;
using condrep::testing::R;

namespace {

DiscreteJoint<double> to_float(const DiscreteJoint<Rational>& dj) {
    Matrix<double> P(dj.I(), dj.J());
    for (std::size_t i = 0; i < dj.I(); ++i)
        for (std::size_t j = 0; j < dj.J(); ++j) P(i, j) = to_double(dj.P()(i, j));
    return DiscreteJoint<double>(P);
}

// Independent oracle for xi: plain enumeration of subsets.
Rational xi_bruteforce(const DiscreteJoint<Rational>& dj) {
    std::optional<Rational> best;
    for (unsigned mask = 1; mask < (1u << dj.I()); ++mask) {
        Rational top(0);
        for (std::size_t j = 0; j < dj.J(); ++j) {
            Rational s(0);
            for (std::size_t i = 0; i < dj.I(); ++i)
                if (mask & (1u << i)) s += dj.P()(i, j);
            s /= dj.nu()[j];
            if (s > top) top = s;
        }
        if (!best || top < *best) best = top;
    }
    return *best;
}

} // namespace

TEST(ApplyT, ConstantsArePreserved) {
    auto dj = condrep::testing::pattern_joint();
    EXPECT_EQ(apply_T(dj, std::vector<Rational>(6, R(1))), std::vector<Rational>(4, R(1)));
    EXPECT_EQ(apply_Tstar(dj, std::vector<Rational>(4, R(1))), std::vector<Rational>(6, R(1)));
}

TEST(ApplyT, SignedPreimage) {
    DiscreteJoint<Rational> dj(Matrix<Rational>{{R(3, 8), R(1, 8)}, {R(1, 8), R(3, 8)}});
    EXPECT_EQ(apply_T(dj, {R(3, 2), R(-1, 2)}), (std::vector<Rational>{R(1), R(0)}));
    EXPECT_THROW(apply_T(dj, {R(1)}), DimensionMismatch);
    EXPECT_THROW(apply_Tstar(dj, {R(1), R(2), R(3)}), DimensionMismatch);
}

TEST(ApplyT, AdjointIdentityExact) {
    RandomStream rng(41, 0);
    for (int t = 0; t < 50; ++t) {
        auto dj = condrep::testing::random_joint(rng, 1 + rng.below(5), 1 + rng.below(7), 0.3);
        std::vector<Rational> f(dj.I()), g(dj.J());
        for (auto& v : f) v = R(static_cast<long>(rng.below(21)) - 10, 3);
        for (auto& v : g) v = R(static_cast<long>(rng.below(21)) - 10, 7);
        EXPECT_EQ(weighted_inner(dj.mu(), f, apply_T(dj, g)), weighted_inner(dj.nu(), apply_Tstar(dj, f), g));
    }
}

TEST(ApplyT, AdjointIdentityFloat) {
    RandomStream rng(42, 0);
    auto dj = to_float(condrep::testing::random_joint(rng, 5, 7, 0.2));
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> f(dj.I()), g(dj.J());
        for (auto& v : f) v = rng.normal();
        for (auto& v : g) v = rng.normal();
        EXPECT_NEAR(weighted_inner(dj.mu(), f, apply_T(dj, g)), weighted_inner(dj.nu(), apply_Tstar(dj, f), g), 1e-12);
    }
}

TEST(NormBounds, DiracCoverageGivesDeltaOne) {
    auto rep = operator_norm_bounds(condrep::testing::pattern_joint(), 200, 1);
    EXPECT_TRUE(rep.l1_nonexpansive);
    EXPECT_TRUE(rep.linf_nonexpansive);
    EXPECT_DOUBLE_EQ(rep.delta_estimate, 1.0);
    ASSERT_TRUE(rep.certified_delta);
    EXPECT_DOUBLE_EQ(*rep.certified_delta, 1.0);
}

TEST(NormBounds, ProductLawGivesDeltaZero) {
    auto rep = operator_norm_bounds(condrep::testing::product_joint({R(1, 2), R(1, 2)}, {R(1, 3), R(2, 3)}), 100, 2);
    EXPECT_NEAR(rep.delta_estimate, 0.0, 1e-15);
    EXPECT_TRUE(rep.exhaustive_signs);
    EXPECT_FALSE(rep.certified_delta);
}

TEST(NormBounds, RandomInstancesAreNonExpansive) {
    RandomStream rng(43, 0);
    for (int t = 0; t < 30; ++t) {
        auto dj = condrep::testing::random_joint(rng, 1 + rng.below(6), 1 + rng.below(7), 0.4);
        auto rep = operator_norm_bounds(dj, 50, static_cast<std::uint64_t>(t));
        EXPECT_TRUE(rep.l1_nonexpansive);
        EXPECT_TRUE(rep.linf_nonexpansive);
        EXPECT_LE(rep.delta_estimate, 1.0);
        if (rep.certified_delta) EXPECT_LE(*rep.certified_delta, rep.delta_estimate + 1e-12);
    }
}

TEST(Xi, MatchesBruteForce) {
    RandomStream rng(44, 0);
    for (int t = 0; t < 40; ++t) {
        auto dj = condrep::testing::random_joint(rng, 1 + rng.below(6), 1 + rng.below(7), 0.4);
        EXPECT_EQ(xi_criterion(dj).xi_exact, xi_bruteforce(dj));
    }
}

TEST(Xi, DiracCoverageAndMixtureFormula) {
    auto full = xi_criterion(condrep::testing::pattern_joint());
    EXPECT_EQ(full.xi_exact, 1);
    EXPECT_TRUE(full.surjective);
    EXPECT_DOUBLE_EQ(full.delta, 1.0);

    auto bm = BernoulliMixture<Rational>::uniform(R(3, 4), 4);
    auto xi = xi_criterion(bm.joint());
    EXPECT_EQ(xi.xi_exact, R(13, 16));
    EXPECT_TRUE(xi.surjective);
    EXPECT_EQ(xi.argmin.size(), 1u);
}

TEST(Xi, MixtureEssSupFormulaForEverySubset) {
    auto bm = BernoulliMixture<Rational>::uniform(R(1, 3), 5);
    auto dj = bm.joint();
    auto Ms = kernel_y_given(dj).rows;
    for (unsigned mask = 1; mask < 32; ++mask) {
        Rational muA(0), top(0);
        for (std::size_t i = 0; i < 5; ++i)
            if (mask & (1u << i)) muA += bm.mu[i];
        for (std::size_t j = 0; j < 5; ++j) {
            Rational s(0);
            for (std::size_t i = 0; i < 5; ++i)
                if (mask & (1u << i)) s += Ms(j, i);
            if (s > top) top = s;
        }
        EXPECT_EQ(top, bm.p + (1 - bm.p) * muA);
    }
}

TEST(Xi, TooLarge) {
    auto bm = BernoulliMixture<double>::uniform(0.5, 13);
    EXPECT_THROW(xi_criterion(bm.joint()), TooLarge);
    EXPECT_THROW(xi_criterion(bm.joint(), 21), TooLarge);
    EXPECT_NO_THROW(xi_criterion(bm.joint(), 13));
}

TEST(Mixture, ClosedFormExample) {
    auto bm = BernoulliMixture<Rational>::uniform(R(1, 2), 2);
    auto sol = bernoulli_mixture_g(bm, {R(1), R(0)});
    EXPECT_EQ(sol.g, (std::vector<Rational>{R(3, 2), R(-1, 2)}));
    EXPECT_TRUE(sol.has_negative_part);
    EXPECT_EQ(apply_T(bm.joint(), sol.g), (std::vector<Rational>{R(1), R(0)}));
    EXPECT_EQ(bernoulli_mixture_T(bm, sol.g), (std::vector<Rational>{R(1), R(0)}));
}

TEST(Mixture, ConstantAndDiracCases) {
    auto bm = BernoulliMixture<Rational>::uniform(R(1, 4), 3);
    auto sol = bernoulli_mixture_g(bm, std::vector<Rational>(3, R(5)));
    EXPECT_EQ(sol.g, std::vector<Rational>(3, R(5)));
    EXPECT_FALSE(sol.has_negative_part);

    BernoulliMixture<Rational> dirac{R(1, 4), {R(0)}, {R(1)}};
    EXPECT_EQ(bernoulli_mixture_g(dirac, {R(2)}).g, std::vector<Rational>{R(2)});
    EXPECT_TRUE(decide_Rplus(dirac.joint()).rplus);
}

TEST(Mixture, NormInequality) {
    RandomStream rng(45, 0);
    for (int t = 0; t < 50; ++t) {
        std::size_t K = 2 + rng.below(6);
        auto bm = BernoulliMixture<Rational>::uniform(R(1 + static_cast<long>(rng.below(3)), 4), K);
        std::vector<Rational> f(K);
        for (auto& v : f) v = R(static_cast<long>(rng.below(6)));
        auto sol = bernoulli_mixture_g(bm, f);
        Rational gl1 = weighted_l1(bm.mu, sol.g), fl1 = weighted_l1(bm.mu, f);
        EXPECT_GE(gl1, fl1);
        EXPECT_EQ(gl1 == fl1, !sol.has_negative_part);
    }
}

TEST(Mixture, ContinuousMuBySampling) {
    auto check = bernoulli_mixture_continuous(
        0.5, [](RandomStream& r) { return r.uniform(); }, [](double x) { return x < 0.3 ? 1.0 : 0.0; }, 200000, 3);
    EXPECT_NEAR(check.mean_f, 0.3, 4 * check.mean_f_se);
    EXPECT_LT(check.max_abs_error, 1e-12);
    EXPECT_NEAR(check.negative_fraction, 0.7, 0.01);
}

TEST(Unconstrained, SurjectiveInstancesSolve) {
    auto bm = BernoulliMixture<double>::uniform(0.75, 6);
    auto dj = bm.joint();
    RandomStream rng(46, 0);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> f(6);
        for (auto& v : f) v = rng.uniform();
        EXPECT_LE(solve_unconstrained(dj, f).residual_inf, 1e-10);
    }
}

TEST(Cor2, Windows) {
    Cor2Law law;
    EXPECT_EQ(cor2_windows(law, R(13, 4)), IntervalSet(R(1, 8), R(3, 8)));
    EXPECT_EQ(cor2_windows(law, R(1, 2)), IntervalSet::unit());
    EXPECT_EQ(cor2_windows(law, R(1) + R(1, 4)), IntervalSet(R(0), R(3, 4)));
}

TEST(Cor2, CheckFindsWindows) {
    Cor2Law law;
    auto full = cor2_check(law, IntervalSet::unit(), R(99, 100));
    EXPECT_TRUE(full.found);
    auto w = cor2_check(law, IntervalSet(R(3, 10), R(2, 5)), R(9, 10));
    ASSERT_TRUE(w.found);
    EXPECT_GT(w.ratio, R(9, 10));
    auto window = cor2_windows(law, w.y);
    EXPECT_EQ(IntervalSet(R(3, 10), R(2, 5)).intersect(window).length() / window.length(), w.ratio);
    EXPECT_THROW(cor2_check(law, IntervalSet(), R(9, 10)), InvalidInput);
    EXPECT_THROW(cor2_check(law, IntervalSet::unit(), R(1, 4)), InvalidInput);
}
