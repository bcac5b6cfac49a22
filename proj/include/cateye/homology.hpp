#pragma once

// Harmonic vector fields tangent to the channel walls. On T x (-J, J) that
// space is spanned by grad-perp q, with q harmonic and constant on each wall,
// so the L2 projection of u = grad-perp psi onto it is
//
//     int u . grad-perp q = (psi|top - psi|bottom) * int_bottom d_n q,
//
// with n pointing from the bottom wall into the channel.

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "cateye/equilibrium.hpp"
#include "cateye/geometry.hpp"
#include "cateye/operators.hpp"

namespace cateye {

struct HarmonicGenerator {
    ScalarField q;
    /// 1 / ||grad-perp q||, making the generator unit-norm in L2.
    double normalization = 0.0;
    /// int_bottom d_n q ds, normal into the channel.
    double flux = 0.0;
    /// Same flux through the top wall, outward normal.
    double flux_top = 0.0;
    /// max |Lap q| at interior nodes.
    double harmonic_residual = 0.0;
    /// physical velocity grad-perp q (unnormalized)
    VectorField velocity;

    const GridPtr& grid() const { return q.grid(); }
};

class HomologyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Wall fluxes int d_n q ds from one-sided second-order derivatives. The
/// arc-length factor cancels against the normal's norm, leaving
/// int (+-J' q_x + q_y) dx on the bottom (+) and top (-) walls.
inline std::pair<double, double> wall_fluxes(const VectorField& grad) {
    const ChannelGrid& g = grad.first.g();
    const std::size_t top = g.ny() - 1;
    double bottom = 0.0, upper = 0.0;
    for (std::size_t i = 0; i < g.nx(); ++i) {
        const double jp = g.jacobian_prime(i);
        bottom += jp * grad.first(i, 0) + grad.second(i, 0);
        upper += -jp * grad.first(i, top) + grad.second(i, top);
    }
    return {bottom * g.dx(), upper * g.dx()};
}

}  // namespace detail

/// Solves Lap q = 0, q = c_low on the bottom wall and c_low + 1 on the top.
inline HarmonicGenerator harmonic_generator(const GridPtr& grid, double c_low = 0.0) {
    const ChannelGrid& g = *grid;
    const LaplaceOperator op(grid);
    const InteriorIndex ix = op.interior();

    // K_II q_I = -K_IB q_B. Using the difference form: write q = c_low + r with
    // r = 0 on the bottom, 1 on the top, so constants never enter the solve.
    ScalarField r(grid);
    for (std::size_t i = 0; i < g.nx(); ++i) r(i, g.ny() - 1) = 1.0;
    const Vector kb = op.stiffness_times(r);
    Vector rhs(static_cast<Eigen::Index>(ix.size()));
    for (std::size_t k = 0; k < ix.size(); ++k) rhs[static_cast<Eigen::Index>(k)] = -kb[static_cast<Eigen::Index>(ix.node(k))];

    const SparseMatrix A = op.interior_system();
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw HomologyError("harmonic generator: factorization failed");
    const Vector sol = ldlt.solve(rhs);
    if (!sol.allFinite() || (A * sol - rhs).norm() > 1e-10 * std::max(1.0, rhs.norm()))
        throw HomologyError("harmonic generator: linear solve failed");
    for (std::size_t k = 0; k < ix.size(); ++k) r[ix.node(k)] = sol[static_cast<Eigen::Index>(k)];

    HarmonicGenerator out;
    out.q = r;
    for (std::size_t k = 0; k < r.size(); ++k) out.q[k] = c_low + r[k];

    const ScalarField lap = op.apply(r);
    for (std::size_t j = 1; j + 1 < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) out.harmonic_residual = std::max(out.harmonic_residual, std::abs(lap(i, j)));

    // gradients of r, not q: same field, without the c_low rounding
    const VectorField grad = gradient(r);
    std::tie(out.flux, out.flux_top) = detail::wall_fluxes(grad);
    out.velocity = {grad.second, grad.first};
    out.velocity.first *= -1.0;

    double n2 = 0.0;
    const auto& m = op.mass();
    for (std::size_t k = 0; k < r.size(); ++k)
        n2 += m[k] * (grad.first[k] * grad.first[k] + grad.second[k] * grad.second[k]);
    if (!(n2 > 0.0)) throw HomologyError("harmonic generator has zero norm");
    out.normalization = 1.0 / std::sqrt(n2);
    return out;
}

/// int u . grad-perp q_hat over the channel, nodal J-weighted quadrature
/// against the unit-norm generator.
inline double homology_projection(const VectorField& u, const HarmonicGenerator& gen) {
    require_same_grid(u.first, gen.q);
    require_same_grid(u.second, gen.q);
    const ChannelGrid& g = *gen.grid();
    const double w = g.dx() * g.deta();
    double s = 0.0;
    for (std::size_t j = 0; j < g.ny(); ++j) {
        const double rw = g.is_wall_row(j) ? 0.5 * w : w;
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            s += rw * g.jacobian(i) * (u.first[k] * gen.velocity.first[k] + u.second[k] * gen.velocity.second[k]);
        }
    }
    return s * gen.normalization;
}

/// |projection(u) - gap * flux * normalization|: the volume integral against
/// the boundary formula.
inline double gap_projection_consistency(const EquilibriumSolution& sol, const HarmonicGenerator& gen) {
    return std::abs(homology_projection(sol.u, gen) - sol.homology_gap * gen.flux * gen.normalization);
}

/// Threshold rule for "trivial homology": |projection| < rel_tol * ||u||.
inline bool has_trivial_homology(const VectorField& u, const HarmonicGenerator& gen, double rel_tol = 1e-6) {
    const ChannelGrid& g = *gen.grid();
    const double w = g.dx() * g.deta();
    double n2 = 0.0;
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            n2 += (g.is_wall_row(j) ? 0.5 : 1.0) * w * g.jacobian(i) * (u.first[k] * u.first[k] + u.second[k] * u.second[k]);
        }
    return std::abs(homology_projection(u, gen)) < rel_tol * std::sqrt(n2);
}

}  // namespace cateye
