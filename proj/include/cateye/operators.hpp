#pragma once

// Finite-difference operators on the mapped channel grid.
//
// With y = eta * J(x), the Dirichlet energy in reference coordinates is
//
//     int |grad u|^2 = int [ J u_x^2 - 2 eta J' u_x u_eta + (1 + eta^2 J'^2) / J u_eta^2 ] dx deta,
//
// and J * Laplacian(u) is the divergence of that metric applied to the
// reference gradient. The stiffness matrix K below is the exact Hessian of a
// discrete version of this energy, so K is symmetric and K u = -M Lap(u) + O(h^2)
// with the lumped area weights M = J dx deta.

#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "cateye/geometry.hpp"

namespace cateye {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

namespace detail {

inline std::size_t wrap(long i, std::size_t n) {
    const long m = static_cast<long>(n);
    return static_cast<std::size_t>(((i % m) + m) % m);
}

}  // namespace detail

/// Maps interior nodes (wall rows removed) to unknown indices.
struct InteriorIndex {
    std::size_t nx = 0, ny = 0;
    std::size_t size() const { return nx * (ny - 2); }
    bool interior(std::size_t j) const { return j > 0 && j + 1 < ny; }
    std::size_t operator()(std::size_t i, std::size_t j) const { return (j - 1) * nx + i; }
    /// node index of unknown k
    std::size_t node(std::size_t k) const { return k + nx; }
};

class LaplaceOperator {
public:
    explicit LaplaceOperator(GridPtr grid) : grid_(std::move(grid)) { assemble(); }

    const GridPtr& grid() const { return grid_; }
    /// Symmetric positive semi-definite stiffness on all nodes.
    const SparseMatrix& stiffness() const { return stiffness_; }
    /// Nodal quadrature weights J dx deta (half weight on the walls).
    const std::vector<double>& mass() const { return mass_; }
    InteriorIndex interior() const { return {grid_->nx(), grid_->ny()}; }

    /// Discrete Laplacian. Interior nodes carry -(K u)/M; wall nodes are filled
    /// by quadratic extrapolation along eta from the three nearest interior rows.
    ScalarField apply(const ScalarField& u) const {
        const ChannelGrid& g = *grid_;
        const Vector ku = stiffness_times(u);
        ScalarField out(grid_);
        for (std::size_t j = 1; j + 1 < g.ny(); ++j)
            for (std::size_t i = 0; i < g.nx(); ++i) {
                const std::size_t k = g.index(i, j);
                out[k] = -ku[static_cast<Eigen::Index>(k)] / mass_[k];
            }
        const std::size_t n = g.ny() - 1;
        for (std::size_t i = 0; i < g.nx(); ++i) {
            out(i, 0) = 3.0 * out(i, 1) - 3.0 * out(i, 2) + out(i, 3);
            out(i, n) = 3.0 * out(i, n - 1) - 3.0 * out(i, n - 2) + out(i, n - 3);
        }
        return out;
    }

    /// K u evaluated in difference form sum_k K_rk (u_k - u_r); K has zero row
    /// sums, so constants map to exactly zero.
    Vector stiffness_times(const ScalarField& u) const {
        Vector out(rows_.rows());
        for (Eigen::Index r = 0; r < rows_.outerSize(); ++r) {
            const double ur = u[static_cast<std::size_t>(r)];
            double acc = 0.0;
            for (RowMatrix::InnerIterator it(rows_, r); it; ++it)
                if (it.col() != r) acc += it.value() * (u[static_cast<std::size_t>(it.col())] - ur);
            out[r] = acc;
        }
        return out;
    }

    /// Operator form on all nodes: Laplacian rows in the interior, identity
    /// rows on the Dirichlet walls.
    SparseMatrix dirichlet_matrix() const {
        const ChannelGrid& g = *grid_;
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(stiffness_.nonZeros()) + 2 * g.nx());
        for (Eigen::Index col = 0; col < stiffness_.outerSize(); ++col)
            for (SparseMatrix::InnerIterator it(stiffness_, col); it; ++it) {
                const auto row = static_cast<std::size_t>(it.row());
                const std::size_t j = row / g.nx();
                if (g.is_wall_row(j)) continue;
                t.emplace_back(it.row(), it.col(), -it.value() / mass_[row]);
            }
        for (std::size_t i = 0; i < g.nx(); ++i) {
            t.emplace_back(static_cast<int>(g.index(i, 0)), static_cast<int>(g.index(i, 0)), 1.0);
            const std::size_t top = g.index(i, g.ny() - 1);
            t.emplace_back(static_cast<int>(top), static_cast<int>(top), 1.0);
        }
        SparseMatrix L(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
        L.setFromTriplets(t.begin(), t.end());
        return L;
    }

    /// K_II + diag(M_I * shift), the J-weighted form of -(Lap - shift) on the
    /// interior unknowns. `shift` is indexed by interior unknown (may be empty).
    SparseMatrix interior_system(std::span<const double> shift = {}) const {
        const ChannelGrid& g = *grid_;
        const InteriorIndex ix = interior();
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(stiffness_.nonZeros()));
        for (Eigen::Index col = 0; col < stiffness_.outerSize(); ++col)
            for (SparseMatrix::InnerIterator it(stiffness_, col); it; ++it) {
                const auto r = static_cast<std::size_t>(it.row());
                const auto c = static_cast<std::size_t>(it.col());
                if (g.is_wall_row(r / g.nx()) || g.is_wall_row(c / g.nx())) continue;
                t.emplace_back(static_cast<int>(r - g.nx()), static_cast<int>(c - g.nx()), it.value());
            }
        if (!shift.empty())
            for (std::size_t k = 0; k < ix.size(); ++k)
                t.emplace_back(static_cast<int>(k), static_cast<int>(k), mass_[ix.node(k)] * shift[k]);
        SparseMatrix A(static_cast<Eigen::Index>(ix.size()), static_cast<Eigen::Index>(ix.size()));
        A.setFromTriplets(t.begin(), t.end());
        return A;
    }

    /// Interior part of the mass weights.
    Vector interior_mass() const {
        const InteriorIndex ix = interior();
        Vector m(static_cast<Eigen::Index>(ix.size()));
        for (std::size_t k = 0; k < ix.size(); ++k) m[static_cast<Eigen::Index>(k)] = mass_[ix.node(k)];
        return m;
    }

    /// Discrete Dirichlet energy u^T K u (approximates int |grad u|^2).
    double energy(const ScalarField& u) const {
        Eigen::Map<const Vector> uv(u.values().data(), static_cast<Eigen::Index>(u.size()));
        return uv.dot(stiffness_ * uv);
    }

    /// Quadrature of f over the channel with the nodal weights.
    double integrate(const ScalarField& f) const {
        double s = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) s += mass_[k] * f[k];
        return s;
    }

private:
    void assemble() {
        const ChannelGrid& g = *grid_;
        const std::size_t nx = g.nx(), ny = g.ny();
        const double dx = g.dx(), de = g.deta();
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(nx * ny * 16);
        auto idx = [&](std::size_t i, std::size_t j) { return static_cast<int>(g.index(detail::wrap(static_cast<long>(i), nx), j)); };
        auto add_pair = [&](int a, int b, double w) {
            t.emplace_back(a, a, w);
            t.emplace_back(b, b, w);
            t.emplace_back(a, b, -w);
            t.emplace_back(b, a, -w);
        };

        // x-faces (i + 1/2, j): J at the face midpoint.
        std::vector<double> jface(nx), jpface(nx);
        for (std::size_t i = 0; i < nx; ++i) {
            const double xf = (static_cast<double>(i) + 0.5) * dx;
            jface[i] = g.jacobian_at(xf, 0);
            jpface[i] = g.jacobian_at(xf, 1);
        }
        for (std::size_t j = 0; j < ny; ++j) {
            const double wrow = g.is_wall_row(j) ? 0.5 * de : de;
            for (std::size_t i = 0; i < nx; ++i) add_pair(idx(i, j), idx(i + 1, j), wrow * jface[i] / dx);
        }
        // eta-faces (i, j + 1/2): (1 + eta^2 J'^2) / J at the face.
        for (std::size_t j = 0; j + 1 < ny; ++j) {
            const double ef = 0.5 * (g.eta(j) + g.eta(j + 1));
            for (std::size_t i = 0; i < nx; ++i) {
                const double J = g.jacobian(i), Jp = g.jacobian_prime(i);
                const double b = (1.0 + ef * ef * Jp * Jp) / J;
                add_pair(idx(i, j), idx(i, j + 1), dx * b / de);
            }
        }
        // Cells (i + 1/2, j + 1/2): cross term 2 C u_x u_eta with C = -eta J'.
        for (std::size_t j = 0; j + 1 < ny; ++j) {
            const double ec = 0.5 * (g.eta(j) + g.eta(j + 1));
            for (std::size_t i = 0; i < nx; ++i) {
                const double c = -ec * jpface[i];
                if (c == 0.0) continue;
                const std::array<int, 4> n{idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)};
                const std::array<double, 4> a{-1.0 / (2 * dx), 1.0 / (2 * dx), -1.0 / (2 * dx), 1.0 / (2 * dx)};
                const std::array<double, 4> b{-1.0 / (2 * de), -1.0 / (2 * de), 1.0 / (2 * de), 1.0 / (2 * de)};
                const double w = dx * de * c;
                for (int p = 0; p < 4; ++p)
                    for (int q = 0; q < 4; ++q) t.emplace_back(n[p], n[q], w * (a[p] * b[q] + b[p] * a[q]));
            }
        }
        stiffness_.resize(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
        stiffness_.setFromTriplets(t.begin(), t.end());
        stiffness_.prune(0.0);
        rows_ = stiffness_;

        mass_.resize(g.size());
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i < nx; ++i)
                mass_[g.index(i, j)] = g.jacobian(i) * dx * de * (g.is_wall_row(j) ? 0.5 : 1.0);
    }

    GridPtr grid_;
    using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
    SparseMatrix stiffness_;
    RowMatrix rows_;
    std::vector<double> mass_;
};

inline LaplaceOperator laplacian(const GridPtr& grid) { return LaplaceOperator(grid); }

/// Reference-coordinate derivatives (d/dx at fixed eta, d/deta at fixed x).
struct ReferenceDerivatives {
    ScalarField d_x;
    ScalarField d_eta;
};

/// Finite-difference weights for the m-th derivative at z on arbitrary nodes
/// (Fornberg's recursion).
inline std::vector<double> fd_weights(double z, std::span<const double> nodes, int m) {
    const std::size_t n = nodes.size();
    std::vector<std::vector<double>> c(n, std::vector<double>(static_cast<std::size_t>(m) + 1, 0.0));
    double c1 = 1.0, c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const int mn = std::min(static_cast<int>(i), m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[i] - z;
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k > 0; --k)
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k > 0; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = c[i][static_cast<std::size_t>(m)];
    return w;
}

/// Centered differences, periodic in x; shifted one-sided windows at the walls.
/// `points` is the stencil width: 3 (default) is second order, 5 fourth order.
inline ReferenceDerivatives reference_derivatives(const ScalarField& f, std::size_t points = 3) {
    const ChannelGrid& g = f.g();
    const std::size_t nx = g.nx(), ny = g.ny();
    ScalarField fx(f.grid()), fe(f.grid());
    if (points == 3) {
        const double idx2 = 1.0 / (2.0 * g.dx()), ide2 = 1.0 / (2.0 * g.deta());
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i < nx; ++i) {
                fx(i, j) = (f(detail::wrap(static_cast<long>(i) + 1, nx), j) - f(detail::wrap(static_cast<long>(i) - 1, nx), j)) * idx2;
                if (j == 0)
                    fe(i, j) = (-3.0 * f(i, 0) + 4.0 * f(i, 1) - f(i, 2)) * ide2;
                else if (j + 1 == ny)
                    fe(i, j) = (3.0 * f(i, j) - 4.0 * f(i, j - 1) + f(i, j - 2)) * ide2;
                else
                    fe(i, j) = (f(i, j + 1) - f(i, j - 1)) * ide2;
            }
        return {std::move(fx), std::move(fe)};
    }
    if (points % 2 == 0 || points < 3 || points > ny) throw GeometryError("stencil width must be odd, >= 3 and <= ny");
    const long hw = static_cast<long>(points / 2);
    std::vector<double> offs(points);
    for (std::size_t k = 0; k < points; ++k) offs[k] = static_cast<double>(static_cast<long>(k) - hw);
    const auto wx = fd_weights(0.0, offs, 1);
    std::vector<double> rel(points);
    for (std::size_t j = 0; j < ny; ++j) {
        const long lo = std::clamp<long>(static_cast<long>(j) - hw, 0, static_cast<long>(ny - points));
        for (std::size_t k = 0; k < points; ++k) rel[k] = static_cast<double>(lo + static_cast<long>(k) - static_cast<long>(j));
        const auto we = fd_weights(0.0, rel, 1);
        for (std::size_t i = 0; i < nx; ++i) {
            double a = 0.0, b = 0.0;
            for (std::size_t k = 0; k < points; ++k) {
                a += wx[k] * f(detail::wrap(static_cast<long>(i) + static_cast<long>(k) - hw, nx), j);
                b += we[k] * f(i, static_cast<std::size_t>(lo) + k);
            }
            fx(i, j) = a / g.dx();
            fe(i, j) = b / g.deta();
        }
    }
    return {std::move(fx), std::move(fe)};
}

/// Physical gradient (d/dx, d/dy) through the chain rule of y = eta J(x).
inline VectorField gradient(const ScalarField& f, std::size_t points = 3) {
    const ChannelGrid& g = f.g();
    auto [fx, fe] = reference_derivatives(f, points);
    ScalarField gx(f.grid()), gy(f.grid());
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const double J = g.jacobian(i), Jp = g.jacobian_prime(i), eta = g.eta(j);
            gx(i, j) = fx(i, j) - eta * Jp / J * fe(i, j);
            gy(i, j) = fe(i, j) / J;
        }
    return {std::move(gx), std::move(gy)};
}

/// u = grad-perp psi = (-d_y psi, d_x psi).
inline VectorField perp_gradient(const ScalarField& psi, std::size_t points = 3) {
    auto [gx, gy] = gradient(psi, points);
    gy *= -1.0;
    return {std::move(gy), std::move(gx)};
}

/// Pointwise divergence of a physical vector field.
inline ScalarField divergence(const VectorField& v) {
    auto g1 = gradient(v.first);
    auto g2 = gradient(v.second);
    ScalarField d(v.first.grid());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = g1.first[k] + g2.second[k];
    return d;
}

/// High-order nodal Laplacian for residual evaluation of smooth closed-form
/// fields. Uses `points`-wide stencils (7 -> sixth order), centered and
/// periodic in x, shifted one-sided windows near the walls. Not used by the
/// solvers; wall rows are left at zero.
inline ScalarField high_order_laplacian(const ScalarField& f, std::size_t points = 7) {
    const ChannelGrid& g = f.g();
    const std::size_t nx = g.nx(), ny = g.ny();
    if (points < 3 || points % 2 == 0 || points > ny) throw GeometryError("stencil width must be odd, >= 3 and <= ny");
    const long hw = static_cast<long>(points / 2);

    std::vector<double> offsets(points);
    for (std::size_t k = 0; k < points; ++k) offsets[k] = static_cast<double>(static_cast<long>(k) - hw);
    const auto w1 = fd_weights(0.0, offsets, 1);
    const auto w2 = fd_weights(0.0, offsets, 2);

    auto d_x = [&](const ScalarField& s, std::size_t i, std::size_t j, const std::vector<double>& w, double h) {
        double acc = 0.0;
        for (std::size_t k = 0; k < points; ++k)
            acc += w[k] * s(detail::wrap(static_cast<long>(i) + static_cast<long>(k) - hw, nx), j);
        return acc / h;
    };
    // eta derivatives of order 1 and 2 at every node
    ScalarField fe(f.grid()), fee(f.grid());
    for (std::size_t j = 0; j < ny; ++j) {
        const long lo = std::clamp<long>(static_cast<long>(j) - hw, 0, static_cast<long>(ny - points));
        std::vector<double> rel(points);
        for (std::size_t k = 0; k < points; ++k) rel[k] = static_cast<double>(lo + static_cast<long>(k) - static_cast<long>(j));
        const auto e1 = fd_weights(0.0, rel, 1);
        const auto e2 = fd_weights(0.0, rel, 2);
        for (std::size_t i = 0; i < nx; ++i) {
            double a = 0.0, b = 0.0;
            for (std::size_t k = 0; k < points; ++k) {
                const double v = f(i, static_cast<std::size_t>(lo) + k);
                a += e1[k] * v;
                b += e2[k] * v;
            }
            fe(i, j) = a / g.deta();
            fee(i, j) = b / (g.deta() * g.deta());
        }
    }
    ScalarField out(f.grid());
    for (std::size_t j = 1; j + 1 < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const double J = g.jacobian(i), Jp = g.jacobian_prime(i), Jpp = g.jacobian_second(i);
            const double eta = g.eta(j);
            const double a = -eta * Jp / J;
            const double b = 1.0 / J;
            const double a_x = -eta * (Jpp * J - Jp * Jp) / (J * J);
            const double a_eta = -Jp / J;
            const double fxx = d_x(f, i, j, w2, g.dx() * g.dx());
            const double fxe = d_x(fe, i, j, w1, g.dx());
            out(i, j) = fxx + 2.0 * a * fxe + (a * a + b * b) * fee(i, j) + (a_x + a * a_eta) * fe(i, j);
        }
    return out;
}

}  // namespace cateye
