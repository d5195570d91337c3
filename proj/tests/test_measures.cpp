#include <gtest/gtest.h>

#include "condrep/measures.hpp"
#include "fixtures.hpp"

using namespace condrep;
using condrep::testing::R;

TEST(Marginals, SingleAtom) {
    DiscreteJoint<Rational> dj(Matrix<Rational>{{R(1)}});
    auto [mu, nu] = marginals(dj);
    EXPECT_EQ(mu, std::vector<Rational>{R(1)});
    EXPECT_EQ(nu, std::vector<Rational>{R(1)});
}

TEST(Marginals, SymmetricTwoByTwo) {
    DiscreteJoint<Rational> dj(Matrix<Rational>{{R(3, 8), R(1, 8)}, {R(1, 8), R(3, 8)}});
    auto [mu, nu] = marginals(dj);
    EXPECT_EQ(mu, (std::vector<Rational>{R(1, 2), R(1, 2)}));
    EXPECT_EQ(nu, (std::vector<Rational>{R(1, 2), R(1, 2)}));
}

TEST(Kernels, RowsAreConditionalLaws) {
    DiscreteJoint<Rational> dj(Matrix<Rational>{{R(3, 8), R(1, 8)}, {R(1, 8), R(3, 8)}});
    auto M = kernel_x_given(dj).rows;
    EXPECT_EQ(M, (Matrix<Rational>{{R(3, 4), R(1, 4)}, {R(1, 4), R(3, 4)}}));

    DiscreteJoint<Rational> one_row(Matrix<Rational>{{R(1, 2), R(1, 2)}});
    EXPECT_EQ(kernel_x_given(one_row).rows, (Matrix<Rational>{{R(1, 2), R(1, 2)}}));
    EXPECT_EQ(kernel_y_given(one_row).rows, (Matrix<Rational>{{R(1)}, {R(1)}}));
}

TEST(Kernels, DisintegrationConsistencyOnRandomInstances) {
    RandomStream rng(11, 0);
    for (int t = 0; t < 40; ++t) {
        auto dj = condrep::testing::random_joint(rng, 1 + rng.below(5), 1 + rng.below(7), 0.3);
        auto M = kernel_x_given(dj).rows;
        auto Ms = kernel_y_given(dj).rows;
        for (std::size_t i = 0; i < dj.I(); ++i)
            for (std::size_t j = 0; j < dj.J(); ++j) EXPECT_EQ(dj.mu()[i] * M(i, j), dj.nu()[j] * Ms(j, i));
        for (std::size_t i = 0; i < dj.I(); ++i) {
            Rational s(0);
            for (std::size_t j = 0; j < dj.J(); ++j) s += M(i, j);
            EXPECT_EQ(s, 1);
        }
    }
}

TEST(DiscreteJoint, RejectsInvalidData) {
    EXPECT_THROW(DiscreteJoint<Rational>(Matrix<Rational>{{R(1, 2), R(1, 4)}}), InvalidInput);
    EXPECT_THROW(DiscreteJoint<Rational>(Matrix<Rational>{{R(1), R(0)}}), InvalidInput);
    EXPECT_THROW(DiscreteJoint<Rational>(Matrix<Rational>{{R(1)}, {R(0)}}), InvalidInput);
    EXPECT_THROW(DiscreteJoint<Rational>(Matrix<Rational>{{R(3, 2), R(-1, 2)}}), InvalidInput);
    EXPECT_THROW(DiscreteJoint<Rational>({R(1), R(0)}, {R(0)}, Matrix<Rational>{{R(1, 2)}, {R(1, 2)}}), InvalidInput);
    EXPECT_THROW(DiscreteJoint<Rational>({R(0)}, {R(1), R(1)}, Matrix<Rational>{{R(1, 2), R(1, 2)}}), InvalidInput);
    EXPECT_THROW(DiscreteJoint<Rational>({R(0)}, {R(1)}, Matrix<Rational>{{R(1, 2), R(1, 2)}}), DimensionMismatch);
}

TEST(DiscreteJoint, FloatModeUsesTolerance) {
    DiscreteJoint<double> dj(Matrix<double>{{0.1, 0.2}, {0.3, 0.4 + 1e-14}});
    EXPECT_NEAR(dj.mu()[1], 0.7, 1e-12);
    EXPECT_THROW(DiscreteJoint<double>(Matrix<double>{{0.1, 0.2}, {0.3, 0.41}}), InvalidInput);
}

TEST(DiracSet, PatternMatrix) {
    auto dj = condrep::testing::pattern_joint();
    EXPECT_EQ(dirac_set(dj), (std::vector<std::size_t>{0, 1, 3, 5}));
}

TEST(DiracSet, EmptyForPositiveAndProductLaws) {
    DiscreteJoint<Rational> pos(Matrix<Rational>{{R(1, 4), R(1, 4)}, {R(1, 4), R(1, 4)}});
    EXPECT_TRUE(dirac_set(pos).empty());
    auto prod = condrep::testing::product_joint({R(1, 3), R(2, 3)}, {R(1, 5), R(3, 10), R(1, 2)});
    EXPECT_TRUE(dirac_set(prod).empty());
}

TEST(DiracSet, ExactModeMatchesBruteForce) {
    RandomStream rng(12, 0);
    for (int t = 0; t < 60; ++t) {
        auto dj = condrep::testing::random_joint(rng, 1 + rng.below(5), 1 + rng.below(7), 0.5);
        std::vector<std::size_t> brute;
        for (std::size_t j = 0; j < dj.J(); ++j) {
            int nonzero = 0;
            for (std::size_t i = 0; i < dj.I(); ++i) nonzero += dj.P()(i, j) != 0;
            if (nonzero == 1) brute.push_back(j);
        }
        EXPECT_EQ(dirac_set(dj), brute);
    }
}

TEST(DiracSet, ToleranceAdmitsNearDiracColumns) {
    DiscreteJoint<double> dj(Matrix<double>{{0.5 - 1e-9, 0.25}, {1e-9, 0.25}});
    EXPECT_TRUE(dirac_set(dj, 0.0).empty());
    EXPECT_EQ(dirac_set(dj, 1e-7), std::vector<std::size_t>{0});
    EXPECT_THROW(dirac_set(dj, 1e-3), InvalidInput);
}

TEST(DEpsilonSet, SupportDiameter) {
    DiscreteJoint<Rational> dj({R(0), R(1)}, {R(0)}, Matrix<Rational>{{R(1, 2)}, {R(1, 2)}});
    EXPECT_TRUE(d_epsilon_set(dj, R(1, 2)).empty());
    EXPECT_TRUE(d_epsilon_set(dj, R(1)).empty());
    EXPECT_EQ(d_epsilon_set(dj, R(3, 2)), std::vector<std::size_t>{0});
}

TEST(DEpsilonSet, ContainsDiracSetAndIsMonotone) {
    RandomStream rng(13, 0);
    for (int t = 0; t < 40; ++t) {
        auto dj = condrep::testing::random_joint(rng, 1 + rng.below(5), 1 + rng.below(7), 0.5);
        auto D = dirac_set(dj);
        std::vector<std::size_t> prev;
        for (long e = 1; e <= 6; ++e) {
            auto De = d_epsilon_set(dj, R(e, 2));
            for (auto j : D) EXPECT_TRUE(std::find(De.begin(), De.end(), j) != De.end());
            for (auto j : prev) EXPECT_TRUE(std::find(De.begin(), De.end(), j) != De.end());
            prev = De;
        }
        Rational span = dj.xs().back() - dj.xs().front() + 1;
        EXPECT_EQ(d_epsilon_set(dj, span).size(), dj.J());
    }
}
