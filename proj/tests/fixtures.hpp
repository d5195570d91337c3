#pragma once

#include <vector>

#include "condrep/measures.hpp"
#include "condrep/rng.hpp"

namespace condrep::testing {

inline Rational R(long p, long q = 1) { return Rational(p, q); }

/// Four rows, six columns: columns 0, 1, 3, 5 are each carried by a single
/// row, columns 2 and 4 are spread over all rows.
inline DiscreteJoint<Rational> pattern_joint() {
    Matrix<Rational> P{
        {R(0), R(1, 8), R(1, 16), R(0), R(1, 16), R(0)},
        {R(1, 10), R(0), R(1, 10), R(0), R(1, 20), R(0)},
        {R(0), R(0), R(1, 20), R(3, 20), R(1, 20), R(0)},
        {R(0), R(0), R(1, 16), R(0), R(1, 16), R(1, 8)},
    };
    return DiscreteJoint<Rational>(std::move(P));
}

inline DiscreteJoint<Rational> product_joint(const std::vector<Rational>& mu, const std::vector<Rational>& nu) {
    Matrix<Rational> P(mu.size(), nu.size());
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (std::size_t j = 0; j < nu.size(); ++j) P(i, j) = mu[i] * nu[j];
    return DiscreteJoint<Rational>(std::move(P));
}

/// Random rational weights in {0, 1, ..., 9} / total, with the given zero
/// probability; rows and columns are forced to be nonzero.
inline DiscreteJoint<Rational> random_joint(RandomStream& rng, std::size_t I, std::size_t J, double zero_prob) {
    Matrix<long> W(I, J, 0);
    for (;;) {
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t j = 0; j < J; ++j)
                W(i, j) = rng.uniform() < zero_prob ? 0 : 1 + static_cast<long>(rng.below(9));
        bool ok = true;
        for (std::size_t i = 0; i < I && ok; ++i) {
            long s = 0;
            for (std::size_t j = 0; j < J; ++j) s += W(i, j);
            ok = s > 0;
        }
        for (std::size_t j = 0; j < J && ok; ++j) {
            long s = 0;
            for (std::size_t i = 0; i < I; ++i) s += W(i, j);
            ok = s > 0;
        }
        if (ok) break;
    }
    long total = 0;
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j) total += W(i, j);
    Matrix<Rational> P(I, J);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j) P(i, j) = Rational(W(i, j), total);
    return DiscreteJoint<Rational>(std::move(P));
}

/// Random instance where every row owns at least one private column; the
/// remaining columns are arbitrary.
inline DiscreteJoint<Rational> random_planted_joint(RandomStream& rng, std::size_t I, std::size_t J) {
    Matrix<long> W(I, J, 0);
    std::vector<std::size_t> cols(J);
    for (std::size_t j = 0; j < J; ++j) cols[j] = j;
    for (std::size_t k = J; k > 1; --k) std::swap(cols[k - 1], cols[rng.below(k)]);
    for (std::size_t i = 0; i < I; ++i) W(i, cols[i]) = 1 + static_cast<long>(rng.below(9));
    for (std::size_t k = I; k < J; ++k) {
        bool any = false;
        for (std::size_t i = 0; i < I; ++i) {
            if (rng.uniform() < 0.6) {
                W(i, cols[k]) = 1 + static_cast<long>(rng.below(9));
                any = true;
            }
        }
        if (!any) W(rng.below(I), cols[k]) = 1;
    }
    long total = 0;
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j) total += W(i, j);
    Matrix<Rational> P(I, J);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j) P(i, j) = Rational(W(i, j), total);
    return DiscreteJoint<Rational>(std::move(P));
}

} // namespace condrep::testing
