#pragma once

// Steady Euler equilibria in streamfunction form:
//
//     Lap psi = F(psi) in D_h,   psi = c1 on the bottom wall, psi = c2 on the top wall.
//
// Solved by damped Newton on N(psi) = Lap psi - F(psi).

#include <Eigen/SparseCholesky>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cateye/geometry.hpp"
#include "cateye/operators.hpp"

namespace cateye {

/// F(psi) = c
struct ConstantVorticity {
    double c = 1.0;
};
/// F(psi) = a psi + b
struct AffineVorticity {
    double a = 0.0;
    double b = 0.0;
};
/// F(psi) = kappa exp(-2 psi), the Kelvin-Stuart profile.
struct StuartVorticity {
    double kappa = 1.0;
};

class VorticityProfile {
public:
    using Kind = std::variant<ConstantVorticity, AffineVorticity, StuartVorticity>;

    VorticityProfile() : kind_(ConstantVorticity{}) {}
    VorticityProfile(Kind k) : kind_(k) {}  // NOLINT(google-explicit-constructor)

    static VorticityProfile constant(double c) { return Kind{ConstantVorticity{c}}; }
    static VorticityProfile affine(double a, double b) { return Kind{AffineVorticity{a, b}}; }
    static VorticityProfile stuart(double kappa) { return Kind{StuartVorticity{kappa}}; }

    const Kind& kind() const { return kind_; }

    double operator()(double psi) const {
        return std::visit(
            [psi](const auto& k) -> double {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, ConstantVorticity>) return k.c;
                else if constexpr (std::is_same_v<T, AffineVorticity>) return k.a * psi + k.b;
                else return k.kappa * std::exp(-2.0 * psi);
            },
            kind_);
    }

    double derivative(double psi) const {
        return std::visit(
            [psi](const auto& k) -> double {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, ConstantVorticity>) return 0.0;
                else if constexpr (std::is_same_v<T, AffineVorticity>) return k.a;
                else return -2.0 * k.kappa * std::exp(-2.0 * psi);
            },
            kind_);
    }

    std::string name() const {
        return std::visit(
            [](const auto& k) -> std::string {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, ConstantVorticity>) return "constant";
                else if constexpr (std::is_same_v<T, AffineVorticity>) return "affine";
                else return "stuart";
            },
            kind_);
    }

    /// Arnold's condition: -lambda1 < F' < 0 or F' > 0. Defined for affine
    /// profiles (constant slope); constant F has F' = 0 and is not covered.
    bool arnold_admissible(double lambda1) const {
        if (const auto* a = std::get_if<AffineVorticity>(&kind_))
            return (a->a > -lambda1 && a->a < 0.0) || a->a > 0.0;
        return false;
    }

    /// F' > -lambda1 everywhere: the hypothesis of the symmetry argument.
    /// Holds for constant and affine slopes above -lambda1; the Stuart
    /// profile has psi-dependent slope and is reported false.
    bool slope_exceeds_minus_lambda1(double lambda1) const {
        if (std::holds_alternative<ConstantVorticity>(kind_)) return true;
        if (const auto* a = std::get_if<AffineVorticity>(&kind_)) return a->a > -lambda1;
        return false;
    }

    bool operator==(const VorticityProfile& o) const {
        if (kind_.index() != o.kind_.index()) return false;
        return std::visit(
            [&](const auto& k) {
                using T = std::decay_t<decltype(k)>;
                const auto& m = std::get<T>(o.kind_);
                if constexpr (std::is_same_v<T, ConstantVorticity>) return k.c == m.c;
                else if constexpr (std::is_same_v<T, AffineVorticity>) return k.a == m.a && k.b == m.b;
                else return k.kappa == m.kappa;
            },
            kind_);
    }

private:
    Kind kind_;
};

class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class SingularLinearization : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NewtonOptions {
    double tol = 1e-10;
    int max_iterations = 200;
    int stagnation_window = 50;
    double min_damping = 1e-4;
};

struct EquilibriumSolution {
    ScalarField psi;
    VectorField u;
    ScalarField omega;
    double c1 = 0.0;
    double c2 = 0.0;
    double homology_gap = 0.0;  ///< c2 - c1
    double pde_residual = 0.0;  ///< max |Lap psi - F(psi)| over interior nodes
    int newton_iterations = 0;
    VorticityProfile profile;

    const GridPtr& grid() const { return psi.grid(); }
};

/// psi'' = F(psi) on [-L, L], psi(-L) = c1, psi(L) = c2, on n uniform nodes,
/// by Newton with a tridiagonal (Thomas) solve.
inline std::vector<double> solve_two_point_bvp(const VorticityProfile& F, double c1, double c2, double half_width,
                                               std::size_t n, double tol = 1e-13, int max_iterations = 100) {
    if (n < 3) throw std::invalid_argument("two-point BVP needs at least 3 nodes");
    const double h = 2.0 * half_width / static_cast<double>(n - 1);
    std::vector<double> psi(n);
    for (std::size_t k = 0; k < n; ++k) psi[k] = c1 + (c2 - c1) * static_cast<double>(k) / static_cast<double>(n - 1);
    const std::size_t m = n - 2;
    std::vector<double> lo(m), di(m), up(m), rhs(m);
    for (int it = 0; it < max_iterations; ++it) {
        double rmax = 0.0;
        for (std::size_t k = 1; k + 1 < n; ++k) {
            const double r = (psi[k - 1] - 2.0 * psi[k] + psi[k + 1]) / (h * h) - F(psi[k]);
            rmax = std::max(rmax, std::abs(r));
            rhs[k - 1] = -r;
            lo[k - 1] = 1.0 / (h * h);
            up[k - 1] = 1.0 / (h * h);
            di[k - 1] = -2.0 / (h * h) - F.derivative(psi[k]);
        }
        if (rmax < tol) break;
        // Thomas elimination
        for (std::size_t k = 1; k < m; ++k) {
            const double w = lo[k] / di[k - 1];
            di[k] -= w * up[k - 1];
            rhs[k] -= w * rhs[k - 1];
        }
        rhs[m - 1] /= di[m - 1];
        for (std::size_t k = m - 1; k-- > 0;) rhs[k] = (rhs[k] - up[k] * rhs[k + 1]) / di[k];
        for (std::size_t k = 0; k < m; ++k) psi[k + 1] += rhs[k];
    }
    return psi;
}

/// Column-wise two-point profiles at each x, used as the Newton start.
inline ScalarField shear_initial_guess(const GridPtr& grid, const VorticityProfile& F, double c1, double c2) {
    ScalarField s(grid);
    for (std::size_t i = 0; i < grid->nx(); ++i) {
        const auto col = solve_two_point_bvp(F, c1, c2, grid->jacobian(i), grid->ny());
        for (std::size_t j = 0; j < grid->ny(); ++j) s(i, j) = col[j];
    }
    return s;
}

namespace detail {

inline double interior_residual(const LaplaceOperator& op, const VorticityProfile& F, const ScalarField& psi,
                                Vector& out) {
    const InteriorIndex ix = op.interior();
    const Vector kp = op.stiffness_times(psi);
    out.resize(static_cast<Eigen::Index>(ix.size()));
    double rmax = 0.0;
    for (std::size_t k = 0; k < ix.size(); ++k) {
        const std::size_t node = ix.node(k);
        const double r = -kp[static_cast<Eigen::Index>(node)] / op.mass()[node] - F(psi[node]);
        out[static_cast<Eigen::Index>(k)] = r;
        rmax = std::max(rmax, std::abs(r));
    }
    return rmax;
}

}  // namespace detail

/// Lap psi = F(psi) with Dirichlet data taken from the wall rows of `boundary`.
/// The interior of `initial` (or of `boundary` when no guess is given) seeds Newton.
inline EquilibriumSolution solve_dirichlet(const GridPtr& grid, const VorticityProfile& F, const ScalarField& boundary,
                                           const NewtonOptions& opt = {},
                                           const std::optional<ScalarField>& initial = std::nullopt) {
    if (!(opt.tol > 0.0)) throw std::invalid_argument("Newton tolerance must be positive");
    const ChannelGrid& g = *grid;
    const LaplaceOperator op(grid);
    const InteriorIndex ix = op.interior();
    const Vector mi = op.interior_mass();

    ScalarField psi = initial ? *initial : boundary;
    if (psi.size() != g.size()) throw GeometryError("initial guess does not match grid");
    for (std::size_t i = 0; i < g.nx(); ++i) {
        psi(i, 0) = boundary(i, 0);
        psi(i, g.ny() - 1) = boundary(i, g.ny() - 1);
    }

    Vector res;
    double rnorm = detail::interior_residual(op, F, psi, res);
    double best = rnorm;
    int best_iter = 0;
    int it = 0;
    std::vector<double> slope(ix.size());
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    bool pattern_ready = false;
    while (rnorm >= opt.tol) {
        if (it >= opt.max_iterations)
            throw NonConvergence("Newton reached " + std::to_string(it) + " iterations, residual " + std::to_string(rnorm));
        if (it - best_iter >= opt.stagnation_window)
            throw NonConvergence("Newton residual stagnated at " + std::to_string(best) + " over " +
                                 std::to_string(opt.stagnation_window) + " iterations");
        ++it;
        for (std::size_t k = 0; k < ix.size(); ++k) slope[k] = F.derivative(psi[ix.node(k)]);
        const SparseMatrix A = op.interior_system(slope);
        if (!pattern_ready) {
            ldlt.analyzePattern(A);
            pattern_ready = true;
        }
        ldlt.factorize(A);
        if (ldlt.info() != Eigen::Success)
            throw SingularLinearization("linearized operator (Lap - F') could not be factorized; F' may be near -lambda1");
        const Vector dvec = ldlt.vectorD();
        const double dmax = dvec.cwiseAbs().maxCoeff();
        if (!(dvec.cwiseAbs().minCoeff() > 1e-10 * dmax))
            throw SingularLinearization("linearized operator (Lap - F') is numerically singular; F' may be near -lambda1");
        const Vector rhs = mi.cwiseProduct(res);
        const Vector delta = ldlt.solve(rhs);
        if (!delta.allFinite() || (A * delta - rhs).norm() > 1e-6 * rhs.norm())
            throw SingularLinearization("linear solve of (Lap - F') is inaccurate; F' may be near -lambda1");

        double alpha = 1.0;
        ScalarField trial = psi;
        Vector tres;
        double tnorm = 0.0;
        while (true) {
            for (std::size_t k = 0; k < ix.size(); ++k)
                trial[ix.node(k)] = psi[ix.node(k)] + alpha * delta[static_cast<Eigen::Index>(k)];
            tnorm = detail::interior_residual(op, F, trial, tres);
            if (tnorm < rnorm || alpha * 0.5 < opt.min_damping) break;
            alpha *= 0.5;
        }
        psi = std::move(trial);
        res = std::move(tres);
        rnorm = tnorm;
        if (rnorm < best * (1.0 - 1e-3)) {
            best = rnorm;
            best_iter = it;
        }
    }

    EquilibriumSolution sol;
    sol.c1 = boundary(0, 0);
    sol.c2 = boundary(0, g.ny() - 1);
    sol.homology_gap = sol.c2 - sol.c1;
    sol.pde_residual = rnorm;
    sol.newton_iterations = it;
    sol.profile = F;
    sol.u = perp_gradient(psi);
    sol.omega = op.apply(psi);
    sol.psi = std::move(psi);
    return sol;
}

/// Lap psi = F(psi), psi = 0 on the bottom wall and psi = gap on the top wall.
/// Without an initial guess Newton starts from column-wise shear profiles.
inline EquilibriumSolution solve_equilibrium(const GridPtr& grid, const VorticityProfile& F, double gap,
                                             const NewtonOptions& opt = {},
                                             const std::optional<ScalarField>& initial = std::nullopt) {
    const double c1 = 0.0, c2 = gap;
    ScalarField boundary(grid, 0.0);
    for (std::size_t i = 0; i < grid->nx(); ++i) boundary(i, grid->ny() - 1) = c2;
    if (initial) return solve_dirichlet(grid, F, boundary, opt, initial);
    return solve_dirichlet(grid, F, boundary, opt, shear_initial_guess(grid, F, c1, c2));
}

class ContinuationError : public std::runtime_error {
public:
    ContinuationError(double eps, const std::string& what)
        : std::runtime_error("continuation failed at eps = " + std::to_string(eps) + ": " + what), eps_(eps) {}
    double eps() const { return eps_; }

private:
    double eps_;
};

/// Solves on h = eps * shape for each eps in turn, seeding each solve with the
/// previous solution's reference-grid values.
inline std::vector<EquilibriumSolution> continuation_sweep(const BoundaryProfile& shape, const std::vector<double>& eps_list,
                                                           std::size_t nx, std::size_t ny, const VorticityProfile& F,
                                                           double gap, const NewtonOptions& opt = {}) {
    if (eps_list.empty()) return {};
    if (eps_list.front() != 0.0) throw std::invalid_argument("continuation must start at eps = 0");
    for (std::size_t k = 1; k < eps_list.size(); ++k)
        if (!(eps_list[k] > eps_list[k - 1])) throw std::invalid_argument("eps list must be increasing");

    std::vector<EquilibriumSolution> out;
    out.reserve(eps_list.size());
    for (double eps : eps_list) {
        try {
            auto grid = build_grid(shape.scaled(eps), nx, ny);
            if (out.empty()) {
                out.push_back(solve_equilibrium(grid, F, gap, opt));
            } else {
                ScalarField guess(grid, out.back().psi.values());
                out.push_back(solve_equilibrium(grid, F, gap, opt, guess));
            }
        } catch (const std::exception& e) {
            throw ContinuationError(eps, e.what());
        }
    }
    return out;
}

struct NamedFlow {
    std::string name;
    ScalarField psi;
};

/// Exact nodal streamfunctions on a flat grid:
///   couette     psi = -y^2/2             u = (y, 0)
///   poiseuille  psi = y/3 - y^3/3        u = (y^2 - 1/3, 0)
///   margin_shear psi = -y^2/2 + 1.01 y    |grad psi| > 0.01
inline std::vector<NamedFlow> builtin_named_flows(const GridPtr& flat_grid) {
    if (!flat_grid->profile().is_flat()) throw GeometryError("named flows are defined on a flat channel");
    return {
        {"couette", ScalarField::sample(flat_grid, [](double, double y) { return -0.5 * y * y; })},
        {"poiseuille", ScalarField::sample(flat_grid, [](double, double y) { return y / 3.0 - y * y * y / 3.0; })},
        {"margin_shear", ScalarField::sample(flat_grid, [](double, double y) { return -0.5 * y * y + 1.01 * y; })},
    };
}

/// Kelvin-Stuart streamfunction psi = ln(A cosh y + B cos x), A^2 - B^2 = 1,
/// with Lap psi = exp(-2 psi).
inline ScalarField stuart_field(const GridPtr& grid, double A = std::sqrt(2.0)) {
    const double B = std::sqrt(A * A - 1.0);
    return ScalarField::sample(grid, [A, B](double x, double y) { return std::log(A * std::cosh(y) + B * std::cos(x)); });
}

}  // namespace cateye
