#pragma once

// Carleman-estimate harness on the upper half channel D_up = {0 <= y <= J(x)}.
//
// Weight phi = exp(lambda phi0), phi0 = J(x) - y. The conjugated operator
// e^{m phi} Lap e^{-m phi} w is evaluated in the expanded form A w + B w with
//
//     A = Lap + m^2 |grad phi|^2,      B = -m (2 grad phi . grad + Lap phi),
//
// so no exponential of m phi is ever formed. The identity checked is
//
//     2 Aw Bw = div T + K,
//     T = -2m ( 2 grad w (grad phi . grad w) - grad phi |grad w|^2 + Lap phi w grad w
//               - |w|^2 grad Lap phi / 2 + m^2 |grad phi|^2 |w|^2 grad phi ),
//     K = 4m Hess phi(grad w, grad w) + 4m^3 Hess phi(grad phi, grad phi) |w|^2 - m Lap^2 phi |w|^2.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cateye/geometry.hpp"
#include "cateye/operators.hpp"

namespace cateye {

class CarlemanError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Analytic derivatives of phi at one point.
struct WeightJet {
    double phi0 = 0.0, phi = 0.0;
    double gx = 0.0, gy = 0.0;               ///< grad phi
    double hxx = 0.0, hxy = 0.0, hyy = 0.0;  ///< Hess phi
    double lap = 0.0;                        ///< Lap phi
    double lgx = 0.0, lgy = 0.0;             ///< grad Lap phi
    double bilap = 0.0;                      ///< Lap^2 phi
};

/// Jet of phi = exp(lambda (J(x) - y)) from J and its first four derivatives.
inline WeightJet weight_jet(double lambda, double y, double J, double J1, double J2, double J3, double J4) {
    WeightJet w;
    w.phi0 = J - y;
    w.phi = std::exp(lambda * w.phi0);
    const double lp = lambda * w.phi;
    // grad phi0 = (J', -1), Hess phi0 = diag(J'', 0)
    w.gx = lp * J1;
    w.gy = -lp;
    w.hxx = lp * (J2 + lambda * J1 * J1);
    w.hxy = -lp * lambda * J1;
    w.hyy = lp * lambda;
    // Lap phi = lambda phi s with s = J'' + lambda (1 + J'^2), a function of x only
    const double s = J2 + lambda * (1.0 + J1 * J1);
    const double s1 = J3 + 2.0 * lambda * J1 * J2;
    const double s2 = J4 + 2.0 * lambda * (J2 * J2 + J1 * J3);
    w.lap = lp * s;
    w.lgx = lp * (lambda * s * J1 + s1);
    w.lgy = -lp * lambda * s;
    w.bilap = lp * (lambda * s * s + 2.0 * lambda * J1 * s1 + s2);
    return w;
}

/// Nodal jets of phi over the whole grid; everything downstream uses the
/// upper half (eta >= 0).
class CarlemanWeight {
public:
    CarlemanWeight(GridPtr grid, double lambda) : grid_(std::move(grid)), lambda_(lambda) {
        if (!(lambda >= 1.0)) throw CarlemanError("lambda must be >= 1");
        const ChannelGrid& g = *grid_;
        jets_.resize(g.size());
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const double x = g.x(i);
            const double J = g.jacobian_at(x, 0), J1 = g.jacobian_at(x, 1), J2 = g.jacobian_at(x, 2);
            const double J3 = g.jacobian_at(x, 3), J4 = g.jacobian_at(x, 4);
            for (std::size_t j = 0; j < g.ny(); ++j) jets_[g.index(i, j)] = weight_jet(lambda, g.eta(j) * J, J, J1, J2, J3, J4);
        }
    }

    const GridPtr& grid() const { return grid_; }
    double lambda() const { return lambda_; }
    const WeightJet& jet(std::size_t k) const { return jets_[k]; }
    const WeightJet& jet(std::size_t i, std::size_t j) const { return jets_[grid_->index(i, j)]; }

    ScalarField phi0() const {
        ScalarField s(grid_);
        for (std::size_t k = 0; k < s.size(); ++k) s[k] = jets_[k].phi0;
        return s;
    }
    ScalarField phi() const {
        ScalarField s(grid_);
        for (std::size_t k = 0; k < s.size(); ++k) s[k] = jets_[k].phi;
        return s;
    }

private:
    GridPtr grid_;
    double lambda_;
    std::vector<WeightJet> jets_;
};

/// A test function compactly supported inside D_up: zero outside the rows
/// center + collar .. ny - 1 - collar.
struct TestFunction {
    ScalarField w;
    std::size_t collar = 2;

    explicit TestFunction(ScalarField field, std::size_t collar_cells = 2) : w(std::move(field)), collar(collar_cells) {
        const ChannelGrid& g = w.g();
        const std::size_t lo = g.center_row() + collar, hi = g.ny() - 1 - collar;
        for (std::size_t j = 0; j < g.ny(); ++j) {
            if (j >= lo && j <= hi) continue;
            for (std::size_t i = 0; i < g.nx(); ++i)
                if (w(i, j) != 0.0) throw CarlemanError("test function must vanish on the collar and outside D_up");
        }
    }
    const GridPtr& grid() const { return w.grid(); }
};

/// amp (1 - r^2)^power for r = |p - c| / radius < 1 (physical distance, x
/// periodic), zero elsewhere.
inline ScalarField bump(const GridPtr& grid, double cx, double cy, double radius, double amp = 1.0, int power = 8) {
    return ScalarField::sample(grid, [&](double x, double y) {
        const double dx = std::remainder(x - cx, two_pi);
        const double r2 = (dx * dx + (y - cy) * (y - cy)) / (radius * radius);
        return r2 < 1.0 ? amp * std::pow(1.0 - r2, power) : 0.0;
    });
}

namespace detail {

struct WDerivs {
    ScalarField lap, gx, gy;
};

inline WDerivs w_derivatives(const ScalarField& w) {
    const LaplaceOperator op(w.grid());
    auto [gx, gy] = gradient(w);
    return {op.apply(w), std::move(gx), std::move(gy)};
}

inline void require_m(double m) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw CarlemanError("m must be finite and non-negative");
}

}  // namespace detail

/// A w = Lap w + m^2 |grad phi|^2 w
inline ScalarField apply_A(const TestFunction& t, const CarlemanWeight& wt, double m) {
    detail::require_m(m);
    const auto d = detail::w_derivatives(t.w);
    ScalarField out(t.grid());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const WeightJet& p = wt.jet(k);
        out[k] = d.lap[k] + m * m * (p.gx * p.gx + p.gy * p.gy) * t.w[k];
    }
    return out;
}

/// B w = -m (2 grad phi . grad w + Lap phi w)
inline ScalarField apply_B(const TestFunction& t, const CarlemanWeight& wt, double m) {
    detail::require_m(m);
    const auto d = detail::w_derivatives(t.w);
    ScalarField out(t.grid());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const WeightJet& p = wt.jet(k);
        out[k] = -m * (2.0 * (p.gx * d.gx[k] + p.gy * d.gy[k]) + p.lap * t.w[k]);
    }
    return out;
}

/// e^{m phi} Lap (e^{-m phi} w), expanded:
/// Lap w - 2m grad phi . grad w + (m^2 |grad phi|^2 - m Lap phi) w.
inline ScalarField conjugated_operator(const TestFunction& t, const CarlemanWeight& wt, double m) {
    detail::require_m(m);
    const auto d = detail::w_derivatives(t.w);
    ScalarField out(t.grid());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const WeightJet& p = wt.jet(k);
        const double g2 = p.gx * p.gx + p.gy * p.gy;
        out[k] = d.lap[k] + m * m * g2 * t.w[k] - m * (2.0 * (p.gx * d.gx[k] + p.gy * d.gy[k]) + p.lap * t.w[k]);
    }
    return out;
}

struct IdentityResidual {
    /// max |2 Aw Bw - div T - K| over interior nodes of D_up
    double residual = 0.0;
    /// max |2 Aw Bw| over the same nodes, for scale
    double lhs_scale = 0.0;
    /// int over the boundary of D_up of T . n
    double boundary_flux = 0.0;
};

/// Both sides of 2 Aw Bw = div T + K with discrete derivatives of w, analytic
/// derivatives of phi; div T by centered differences of nodal T.
inline IdentityResidual divergence_identity_residual(const TestFunction& t, const CarlemanWeight& wt, double m) {
    detail::require_m(m);
    const ChannelGrid& g = *t.grid();
    const auto d = detail::w_derivatives(t.w);
    const ScalarField& w = t.w;
    ScalarField tx(t.grid()), ty(t.grid()), kk(t.grid()), lhs(t.grid());
    for (std::size_t k = 0; k < w.size(); ++k) {
        const WeightJet& p = wt.jet(k);
        const double wx = d.gx[k], wy = d.gy[k], wv = w[k];
        const double g2 = p.gx * p.gx + p.gy * p.gy;
        const double pw = p.gx * wx + p.gy * wy;
        const double w2 = wx * wx + wy * wy;
        tx[k] = -2.0 * m * (2.0 * wx * pw - p.gx * w2 + p.lap * wv * wx - 0.5 * wv * wv * p.lgx + m * m * g2 * wv * wv * p.gx);
        ty[k] = -2.0 * m * (2.0 * wy * pw - p.gy * w2 + p.lap * wv * wy - 0.5 * wv * wv * p.lgy + m * m * g2 * wv * wv * p.gy);
        const double hww = p.hxx * wx * wx + 2.0 * p.hxy * wx * wy + p.hyy * wy * wy;
        const double hpp = p.hxx * p.gx * p.gx + 2.0 * p.hxy * p.gx * p.gy + p.hyy * p.gy * p.gy;
        kk[k] = 4.0 * m * hww + 4.0 * m * m * m * hpp * wv * wv - m * p.bilap * wv * wv;
        const double a = d.lap[k] + m * m * g2 * wv;
        const double b = -m * (2.0 * pw + p.lap * wv);
        lhs[k] = 2.0 * a * b;
    }
    const ScalarField divT = divergence({tx, ty});

    IdentityResidual r;
    for (std::size_t j = g.center_row() + 1; j + 1 < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            r.residual = std::max(r.residual, std::abs(lhs[k] - divT[k] - kk[k]));
            r.lhs_scale = std::max(r.lhs_scale, std::abs(lhs[k]));
        }
    // outward normals: (0, -1) on y = 0; (-J', 1) / |.| on the wall, with ds = |.| dx
    const std::size_t c = g.center_row(), top = g.ny() - 1;
    double flux = 0.0;
    for (std::size_t i = 0; i < g.nx(); ++i) {
        flux += -ty(i, c);
        flux += -g.jacobian_prime(i) * tx(i, top) + ty(i, top);
    }
    r.boundary_flux = flux * g.dx();
    return r;
}

/// Nodal quadrature over D_up (half weight on the eta = 0 row and the wall).
inline double upper_integral(const ScalarField& f) {
    const ChannelGrid& g = f.g();
    double s = 0.0;
    for (std::size_t j = g.center_row(); j < g.ny(); ++j) {
        const double rw = (j == g.center_row() || j + 1 == g.ny()) ? 0.5 : 1.0;
        for (std::size_t i = 0; i < g.nx(); ++i) s += rw * g.jacobian(i) * f(i, j);
    }
    return s * g.dx() * g.deta();
}

struct SweepRow {
    double m = 0.0;
    double lhs = 0.0;  ///< int |e^{m phi} Lap e^{-m phi} w|^2
    double rhs = 0.0;  ///< m^2 int |w|^2
    double ratio = 0.0;
    double log_lhs = 0.0, log_rhs = 0.0, log_ratio = 0.0;
    /// log of the decay factor e^{-m c} from the unique-continuation step
    double log_decay = 0.0;
    bool defined = true;
};

/// Ratio lhs / (m^2 ||w||^2) for each m. The expanded operator never forms
/// e^{m phi}, so no exponent budget applies; log columns are reported for
/// tabulation. A zero w yields rows marked undefined.
inline std::vector<SweepRow> carleman_ratio_sweep(const TestFunction& t, const CarlemanWeight& wt, const std::vector<double>& m_list,
                                                  double cutoff_c = 0.1) {
    for (std::size_t k = 0; k < m_list.size(); ++k) {
        if (!(m_list[k] >= 1.0)) throw CarlemanError("m values must be >= 1");
        if (k > 0 && !(m_list[k] > m_list[k - 1])) throw CarlemanError("m values must increase");
    }
    ScalarField w2(t.grid());
    for (std::size_t k = 0; k < w2.size(); ++k) w2[k] = t.w[k] * t.w[k];
    const double norm2 = upper_integral(w2);
    std::vector<SweepRow> rows;
    for (double m : m_list) {
        SweepRow r;
        r.m = m;
        r.log_decay = -m * cutoff_c;
        if (norm2 == 0.0) {
            r.defined = false;
            r.lhs = r.rhs = r.ratio = std::numeric_limits<double>::quiet_NaN();
            r.log_lhs = r.log_rhs = r.log_ratio = std::numeric_limits<double>::quiet_NaN();
            rows.push_back(r);
            continue;
        }
        ScalarField c = conjugated_operator(t, wt, m);
        for (std::size_t k = 0; k < c.size(); ++k) c[k] *= c[k];
        r.lhs = upper_integral(c);
        r.rhs = m * m * norm2;
        r.ratio = r.lhs / r.rhs;
        r.log_lhs = std::log(r.lhs);
        r.log_rhs = std::log(r.rhs);
        r.log_ratio = std::log(r.ratio);
        rows.push_back(r);
    }
    return rows;
}

/// Smooth step: 0 for z <= 1/2, 1 for z >= 1, C-infinity in between.
inline double cutoff_profile(double z) {
    auto f = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
    if (z <= 0.5) return 0.0;
    if (z >= 1.0) return 1.0;
    const double t = 2.0 * z - 1.0;
    return f(t) / (f(t) + f(1.0 - t));
}

/// chi_c = chi0((phi - 1) / c) on D_up; lower-half nodes use the mirrored
/// weight phi(x, |y|) so the field is smooth across y = 0.
inline ScalarField build_cutoff(const CarlemanWeight& wt, double c) {
    if (!(c > 0.0)) throw CarlemanError("cutoff parameter c must be positive");
    const ChannelGrid& g = *wt.grid();
    ScalarField chi(wt.grid());
    for (std::size_t j = 0; j < g.ny(); ++j) {
        const std::size_t jm = j < g.center_row() ? g.ny() - 1 - j : j;
        for (std::size_t i = 0; i < g.nx(); ++i) chi(i, j) = cutoff_profile((wt.jet(i, jm).phi - 1.0) / c);
    }
    return chi;
}

/// Proof-shaped test function w = chi_c * f, further multiplied by smooth
/// cutoffs in eta at both ends of D_up so it vanishes on the collar.
inline TestFunction localized_test_function(const ScalarField& f, const CarlemanWeight& wt, double c, std::size_t collar = 2) {
    require_same_grid(f, wt.phi());
    const ChannelGrid& g = f.g();
    const ScalarField chi = build_cutoff(wt, c);
    const double e0 = 2.0 * static_cast<double>(collar + 1) * g.deta();
    ScalarField w(f.grid());
    for (std::size_t j = g.center_row(); j < g.ny(); ++j) {
        const double eta = g.eta(j);
        const double band = cutoff_profile(eta / e0) * cutoff_profile((1.0 - eta) / e0);
        for (std::size_t i = 0; i < g.nx(); ++i) w(i, j) = chi(i, j) * band * f(i, j);
    }
    return TestFunction(std::move(w), collar);
}

}  // namespace cateye
