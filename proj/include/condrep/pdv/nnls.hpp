#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "condrep/error.hpp"

namespace condrep::pdv {

struct NnlsResult {
    Eigen::VectorXd x;
    double objective = 0.0;  // ||A x - b||^2
    std::size_t iterations = 0;
    bool converged = false;
};

/// Lawson-Hanson active set method for min ||A x - b||^2 subject to x >= 0.
inline NnlsResult nnls(const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b, std::size_t max_iter = 0) {
    const Eigen::Index m = A_in.rows(), n = A_in.cols();
    if (b.size() != m) throw DimensionMismatch("nnls: right-hand side has the wrong length");
    // Unit-norm columns so the dual test w_j <= tol is scale free.
    Eigen::VectorXd scale = A_in.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < n; ++j)
        if (!(scale[j] > 0)) scale[j] = 1.0;
    const Eigen::MatrixXd A = A_in * scale.cwiseInverse().asDiagonal();
    if (max_iter == 0) max_iter = static_cast<std::size_t>(3 * n + 50);
    NnlsResult out;
    out.x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 1e-14 * std::max(b.norm(), 1e-300) * std::sqrt(static_cast<double>(std::max(m, n)));

    auto solve_passive = [&](Eigen::VectorXd& z) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        z = Eigen::VectorXd::Zero(n);
        if (idx.empty()) return;
        Eigen::MatrixXd Ap(m, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t q = 0; q < idx.size(); ++q) Ap.col(static_cast<Eigen::Index>(q)) = A.col(idx[q]);
        Eigen::VectorXd zp = Ap.completeOrthogonalDecomposition().solve(b);
        for (std::size_t q = 0; q < idx.size(); ++q) z[idx[q]] = zp[static_cast<Eigen::Index>(q)];
    };

    Eigen::VectorXd w = A.transpose() * (b - A * out.x);
    while (out.iterations < max_iter) {
        Eigen::Index best = -1;
        double wmax = tol;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
                wmax = w[j];
                best = j;
            }
        if (best < 0) {
            out.converged = true;
            break;
        }
        passive[static_cast<std::size_t>(best)] = true;
        ++out.iterations;
        Eigen::VectorXd z;
        for (;;) {
            solve_passive(z);
            double alpha = 2.0;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && z[j] <= 0) {
                    const double denom = out.x[j] - z[j];
                    if (denom > 0) alpha = std::min(alpha, out.x[j] / denom);
                }
            if (alpha > 1.0) break;
            out.x += alpha * (z - out.x);
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && out.x[j] <= 1e-15 * std::max(1.0, out.x.cwiseAbs().maxCoeff())) {
                    passive[static_cast<std::size_t>(j)] = false;
                    out.x[j] = 0;
                }
            if (std::none_of(passive.begin(), passive.end(), [](bool p) { return p; })) {
                z = Eigen::VectorXd::Zero(n);
                break;
            }
        }
        out.x = z;
        w = A.transpose() * (b - A * out.x);
    }
    out.x = out.x.cwiseQuotient(scale);
    out.objective = (A_in * out.x - b).squaredNorm();
    return out;
}

struct ClosestResult {
    Eigen::VectorXd g;
    double max_gap = 0.0;  // max_i |(M g - f)_i|
    std::size_t iterations = 0;
    bool converged = false;
};

/// Minimises sum_j nu_j (g_j - g0_j)^2 over { g >= 0 : M g = f } by a
/// semismooth Newton method on the dual, g(lambda) = max(0, g0 + M' lambda / nu).
/// The set must be nonempty; the caller checks max_gap.
inline ClosestResult closest_nonneg(const Eigen::MatrixXd& M, const Eigen::VectorXd& f, const Eigen::VectorXd& nu,
                                    const Eigen::VectorXd& g0, std::size_t max_iter = 200) {
    const Eigen::Index m = M.rows(), n = M.cols();
    if (f.size() != m || nu.size() != n || g0.size() != n) throw DimensionMismatch("closest_nonneg: size mismatch");
    for (Eigen::Index j = 0; j < n; ++j)
        if (!(nu[j] > 0)) throw InvalidInput("closest_nonneg: weights must be positive");

    auto primal = [&](const Eigen::VectorXd& lam) {
        Eigen::VectorXd a = M.transpose() * lam;
        Eigen::VectorXd g(n);
        for (Eigen::Index j = 0; j < n; ++j) g[j] = std::max(0.0, g0[j] + a[j] / nu[j]);
        return g;
    };
    auto dual = [&](const Eigen::VectorXd& lam, const Eigen::VectorXd& g) {
        double s = 0;
        for (Eigen::Index j = 0; j < n; ++j) s += 0.5 * nu[j] * (g[j] * g[j] - g0[j] * g0[j]);
        return s - lam.dot(f);
    };

    ClosestResult out;
    const double scale = std::max(1e-300, f.cwiseAbs().maxCoeff());
    const double tol = 1e-13 * std::max(1.0, scale);
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd g = primal(lam);
    Eigen::VectorXd grad = M * g - f;
    double phi = dual(lam, g);
    for (; out.iterations < max_iter && grad.cwiseAbs().maxCoeff() > tol; ++out.iterations) {
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index j = 0; j < n; ++j)
            if (g0[j] + (M.col(j).dot(lam)) / nu[j] > 0) H.noalias() += M.col(j) * M.col(j).transpose() / nu[j];
        const double reg = 1e-12 * std::max(1e-300, H.diagonal().cwiseAbs().maxCoeff()) + 1e-300;
        H.diagonal().array() += reg;
        Eigen::VectorXd d = H.ldlt().solve(-grad);
        if (!d.allFinite()) break;
        double t = 1.0;
        const double slope = grad.dot(d);
        const double gnorm = grad.norm();
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            Eigen::VectorXd lt = lam + t * d;
            Eigen::VectorXd gt = primal(lt);
            const double pt = dual(lt, gt);
            // Near the optimum the dual value is flat to rounding; a smaller
            // gradient is then the better acceptance test.
            if (pt <= phi + 1e-4 * t * slope || (M * gt - f).norm() < 0.5 * gnorm) {
                lam = lt;
                g = gt;
                phi = pt;
                moved = true;
                break;
            }
        }
        if (!moved) break;
        grad = M * g - f;
    }
    out.g = g;
    out.max_gap = (M * g - f).cwiseAbs().maxCoeff();
    out.converged = out.max_gap <= tol;
    return out;
}

} // namespace condrep::pdv
