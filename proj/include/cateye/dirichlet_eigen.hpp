#pragma once

// Smallest eigenvalue of the Dirichlet Laplacian -Lap on D_h.
//
// Works on the generalized symmetric pair K v = lambda M v (stiffness and
// lumped area weights), which is M^{-1/2} K M^{-1/2} in symmetrized form.

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "cateye/geometry.hpp"
#include "cateye/operators.hpp"

namespace cateye {

struct EigenResult {
    double lambda1 = 0.0;
    ScalarField eigenfunction;  ///< unit J-weighted L2 norm, positive inside
    double residual = 0.0;      ///< ||(-Lap - lambda1) v|| / ||v|| in the weighted norm
    int iterations = 0;
    bool converged = false;
};

class EigenNonConvergence : public std::runtime_error {
public:
    explicit EigenNonConvergence(EigenResult last)
        : std::runtime_error("inverse iteration did not converge after " + std::to_string(last.iterations) +
                             " iterations (lambda1 ~ " + std::to_string(last.lambda1) + ")"),
          last_(std::move(last)) {}
    const EigenResult& last_iterate() const { return last_; }

private:
    EigenResult last_;
};

struct EigenOptions {
    double tol = 1e-9;
    int max_iterations = 500;
    double cg_tolerance = 1e-13;
};

/// Inverse power iteration with conjugate-gradient inner solves, started from
/// the flat-channel mode cos(pi eta / 2).
inline EigenResult smallest_dirichlet_eigenvalue(const GridPtr& grid, const EigenOptions& opt = {}) {
    if (!(opt.tol > 0.0)) throw std::invalid_argument("eigen tolerance must be positive");
    const LaplaceOperator op(grid);
    const InteriorIndex ix = op.interior();
    const SparseMatrix A = op.interior_system();
    const Vector m = op.interior_mass();
    const auto n = static_cast<Eigen::Index>(ix.size());

    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(opt.cg_tolerance);
    cg.setMaxIterations(20 * static_cast<int>(n));
    cg.compute(A);

    Vector v(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const std::size_t node = ix.node(static_cast<std::size_t>(k));
        v[k] = std::cos(0.5 * std::numbers::pi * grid->eta(node / grid->nx()));
    }
    auto mnorm = [&](const Vector& z) { return std::sqrt(z.dot(m.cwiseProduct(z))); };
    v /= mnorm(v);

    EigenResult res;
    double lambda_prev = v.dot(A * v);
    for (int it = 1; it <= opt.max_iterations; ++it) {
        const Vector rhs = m.cwiseProduct(v);
        Vector y = cg.solveWithGuess(rhs, v / lambda_prev);
        v = y / mnorm(y);
        const Vector av = A * v;
        const double lambda = v.dot(av);
        const Vector r = av.cwiseQuotient(m) - lambda * v;
        res.lambda1 = lambda;
        res.residual = mnorm(r);
        res.iterations = it;
        const bool done = std::abs(lambda - lambda_prev) < opt.tol && res.residual < 10.0 * opt.tol;
        lambda_prev = lambda;
        if (done) {
            res.converged = true;
            break;
        }
    }
    if (v.sum() < 0.0) v = -v;
    res.eigenfunction = ScalarField(grid);
    for (Eigen::Index k = 0; k < n; ++k) res.eigenfunction[ix.node(static_cast<std::size_t>(k))] = v[k];
    if (!res.converged) throw EigenNonConvergence(std::move(res));
    return res;
}

inline EigenResult smallest_dirichlet_eigenvalue(const GridPtr& grid, double tol) {
    EigenOptions o;
    o.tol = tol;
    return smallest_dirichlet_eigenvalue(grid, o);
}

}  // namespace cateye
