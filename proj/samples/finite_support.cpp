// Decides representability for a small joint law and solves one instance in
// exact arithmetic.
#include <iostream>

#include "condrep/operators.hpp"
#include "condrep/representation.hpp"

using namespace condrep;

int main() {
    auto r = [](long p, long q) { return Rational(p, q); };
    // Rows 0 and 1 each own a column; column 2 is shared.
    DiscreteJoint<Rational> dj(Matrix<Rational>{
        {r(1, 4), r(0, 1), r(1, 8)},
        {r(0, 1), r(1, 2), r(1, 8)},
    });

    auto rep = decide_Rplus(dj);
    std::cout << "every f >= 0 representable: " << (rep.rplus ? "yes" : "no") << '\n';

    std::vector<Rational> f{r(3, 1), r(1, 2)};
    auto g = construct_g_dirac(dj, f);
    std::cout << "g from the Dirac columns:";
    for (const auto& v : g) std::cout << ' ' << to_string(v);
    std::cout << '\n';

    auto back = apply_T(dj, g);
    std::cout << "E[g(Y) | X]:";
    for (const auto& v : back) std::cout << ' ' << to_string(v);
    std::cout << '\n';

    auto xi = xi_criterion(dj);
    std::cout << "xi = " << to_string(xi.xi_exact) << (xi.surjective ? " (T* surjective)" : "") << '\n';

    // Spreading the second row over every column breaks representability of 1_{x_0}.
    DiscreteJoint<Rational> mixed(Matrix<Rational>{
        {r(1, 4), r(1, 8), r(1, 8)},
        {r(1, 4), r(1, 8), r(1, 8)},
    });
    auto lp = solve_nonneg(mixed, std::vector<Rational>{r(1, 1), r(0, 1)});
    std::cout << "1_{x_0} under the product law: " << (lp.feasible ? "feasible" : "infeasible, certificate");
    if (!lp.feasible)
        for (const auto& v : lp.cert) std::cout << ' ' << to_string(v);
    std::cout << '\n';
}
