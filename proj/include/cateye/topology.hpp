#pragma once

// Streamline topology of a streamfunction on a channel grid: critical points,
// orbit tracing, island detection, the centerline test and reflection checks.
//
// psi is represented by a C1 bicubic Hermite interpolant in reference
// coordinates (xi, eta); velocities are exact derivatives of the interpolant,
// so traced orbits can be projected back onto their level set after each step.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cateye/equilibrium.hpp"
#include "cateye/geometry.hpp"
#include "cateye/operators.hpp"

namespace cateye {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Value and derivatives of psi at a point. Reference derivatives are
/// w.r.t. (xi, eta); physical ones w.r.t. (x, y).
struct FieldSample {
    double value = 0.0;
    double d_xi = 0.0, d_eta = 0.0;
    double d_xixi = 0.0, d_xieta = 0.0, d_etaeta = 0.0;
    double eta = 0.0;
    double jac = 1.0, jac_prime = 0.0;

    double d_x() const { return d_xi - eta * jac_prime / jac * d_eta; }
    double d_y() const { return d_eta / jac; }
    /// u = (-psi_y, psi_x)
    Point2 velocity() const { return {-d_y(), d_x()}; }
    double speed() const { return std::hypot(d_x(), d_y()); }
};

class FieldInterpolant {
public:
    explicit FieldInterpolant(const ScalarField& psi) : grid_(psi.grid()), f_(psi) {
        auto d = reference_derivatives(psi, 5);
        fx_ = std::move(d.d_x);
        fe_ = std::move(d.d_eta);
        fxe_ = reference_derivatives(fe_, 5).d_x;
        const ChannelGrid& g = *grid_;
        lo_ = std::numeric_limits<double>::infinity();
        hi_ = -lo_;
        for (std::size_t j = 0; j < g.ny(); ++j)
            for (std::size_t i = 0; i < g.nx(); ++i) {
                const double J = g.jacobian(i), eta = g.eta(j);
                const double gx = fx_(i, j) - eta * g.jacobian_prime(i) / J * fe_(i, j);
                const double gy = fe_(i, j) / J;
                max_speed_ = std::max(max_speed_, std::hypot(gx, gy));
                lo_ = std::min(lo_, psi(i, j));
                hi_ = std::max(hi_, psi(i, j));
            }
    }

    const GridPtr& grid() const { return grid_; }
    const ScalarField& field() const { return f_; }
    const ScalarField& nodal_d_xi() const { return fx_; }
    const ScalarField& nodal_d_eta() const { return fe_; }
    double max_speed() const { return max_speed_; }
    double oscillation() const { return hi_ - lo_; }

    /// Evaluation in reference coordinates; xi is periodic, eta is
    /// extrapolated from the wall cells when slightly outside [-1, 1].
    FieldSample at_reference(double xi, double eta) const {
        const ChannelGrid& g = *grid_;
        const double dx = g.dx(), de = g.deta();
        double xw = std::fmod(xi, two_pi);
        if (xw < 0) xw += two_pi;
        auto i = static_cast<std::size_t>(std::floor(xw / dx));
        if (i >= g.nx()) i = g.nx() - 1;
        const double t = xw / dx - static_cast<double>(i);
        const double er = (eta + 1.0) / de;
        auto jl = static_cast<long>(std::floor(er));
        jl = std::clamp<long>(jl, 0, static_cast<long>(g.ny()) - 2);
        const auto j = static_cast<std::size_t>(jl);
        const double s = er - static_cast<double>(jl);
        const std::size_t i1 = (i + 1) % g.nx();

        // Hermite basis: value weights (v) and slope weights (m) with derivatives.
        auto basis = [](double u, std::array<double, 2>& v, std::array<double, 2>& m, std::array<double, 2>& dv,
                        std::array<double, 2>& dm, std::array<double, 2>& d2v, std::array<double, 2>& d2m) {
            const double u2 = u * u, u3 = u2 * u;
            v = {2 * u3 - 3 * u2 + 1, -2 * u3 + 3 * u2};
            m = {u3 - 2 * u2 + u, u3 - u2};
            dv = {6 * u2 - 6 * u, -6 * u2 + 6 * u};
            dm = {3 * u2 - 4 * u + 1, 3 * u2 - 2 * u};
            d2v = {12 * u - 6, -12 * u + 6};
            d2m = {6 * u - 4, 6 * u - 2};
        };
        std::array<double, 2> vt, mt, dvt, dmt, d2vt, d2mt, vs, ms, dvs, dms, d2vs, d2ms;
        basis(t, vt, mt, dvt, dmt, d2vt, d2mt);
        basis(s, vs, ms, dvs, dms, d2vs, d2ms);

        FieldSample out;
        const std::array<std::size_t, 2> ii{i, i1};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                const std::size_t ci = ii[a], cj = j + static_cast<std::size_t>(b);
                const double f = f_(ci, cj), fx = fx_(ci, cj) * dx, fe = fe_(ci, cj) * de, fxe = fxe_(ci, cj) * dx * de;
                out.value += f * vt[a] * vs[b] + fx * mt[a] * vs[b] + fe * vt[a] * ms[b] + fxe * mt[a] * ms[b];
                out.d_xi += f * dvt[a] * vs[b] + fx * dmt[a] * vs[b] + fe * dvt[a] * ms[b] + fxe * dmt[a] * ms[b];
                out.d_eta += f * vt[a] * dvs[b] + fx * mt[a] * dvs[b] + fe * vt[a] * dms[b] + fxe * mt[a] * dms[b];
                out.d_xixi += f * d2vt[a] * vs[b] + fx * d2mt[a] * vs[b] + fe * d2vt[a] * ms[b] + fxe * d2mt[a] * ms[b];
                out.d_xieta += f * dvt[a] * dvs[b] + fx * dmt[a] * dvs[b] + fe * dvt[a] * dms[b] + fxe * dmt[a] * dms[b];
                out.d_etaeta += f * vt[a] * d2vs[b] + fx * mt[a] * d2vs[b] + fe * vt[a] * d2ms[b] + fxe * mt[a] * d2ms[b];
            }
        out.d_xi /= dx;
        out.d_eta /= de;
        out.d_xixi /= dx * dx;
        out.d_xieta /= dx * de;
        out.d_etaeta /= de * de;
        out.eta = eta;
        out.jac = g.jacobian_at(xw, 0);
        out.jac_prime = g.jacobian_at(xw, 1);
        return out;
    }

    FieldSample at(Point2 p) const {
        double xw = std::fmod(p.x, two_pi);
        if (xw < 0) xw += two_pi;
        return at_reference(xw, p.y / grid_->jacobian_at(xw, 0));
    }

    /// eta of a physical point (x may be unwrapped).
    double eta_of(Point2 p) const {
        double xw = std::fmod(p.x, two_pi);
        if (xw < 0) xw += two_pi;
        return p.y / grid_->jacobian_at(xw, 0);
    }

private:
    GridPtr grid_;
    ScalarField f_, fx_, fe_, fxe_;
    double max_speed_ = 0.0;
    double lo_ = 0.0, hi_ = 0.0;
};

// ---------------------------------------------------------------- critical points

enum class CriticalType { Elliptic, Hyperbolic, Degenerate };

inline std::string to_string(CriticalType t) {
    switch (t) {
        case CriticalType::Elliptic: return "elliptic";
        case CriticalType::Hyperbolic: return "hyperbolic";
        default: return "degenerate";
    }
}

struct CriticalPoint {
    Point2 position;
    CriticalType type = CriticalType::Degenerate;
    double value = 0.0;
    /// physical Hessian determinant
    double hessian_det = 0.0;
    double gradient_norm = 0.0;
    bool refined = true;  ///< false if Newton did not converge
    bool on_wall = false;
};

/// A row of stagnation (shear centerline): candidates over more than half the
/// period at one height.
struct CriticalLine {
    double eta_low = 0.0;
    double eta_high = 0.0;
    double eta() const { return 0.5 * (eta_low + eta_high); }
};

struct CriticalSet {
    std::vector<CriticalPoint> points;
    std::vector<CriticalLine> lines;

    std::size_t count(CriticalType t) const {
        return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [t](const auto& p) { return p.type == t; }));
    }
};

struct CriticalOptions {
    double newton_tol = 1e-10;
    int newton_max_iterations = 50;
    /// |det| below this times |H|_F^2 is degenerate
    double degenerate_tol = 1e-6;
    /// nodal gradient components below this times max|grad| count as zero
    double zero_tol = 1e-8;
    double line_fraction = 0.5;
};

inline CriticalSet find_critical_points(const FieldInterpolant& f, const CriticalOptions& o = {}) {
    const ChannelGrid& g = *f.grid();
    const std::size_t nx = g.nx(), ny = g.ny();
    const ScalarField& a = f.nodal_d_xi();
    const ScalarField& b = f.nodal_d_eta();
    const double za = o.zero_tol * std::max(a.max_abs(), b.max_abs());

    auto straddles = [&](const ScalarField& c, std::size_t i, std::size_t j) {
        const std::size_t i1 = (i + 1) % nx;
        const std::array<double, 4> v{c(i, j), c(i1, j), c(i, j + 1), c(i1, j + 1)};
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *lo <= za && *hi >= -za;
    };

    CriticalSet out;
    std::vector<std::vector<std::size_t>> rows(ny - 1);
    for (std::size_t j = 0; j + 1 < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i)
            if (straddles(a, i, j) && straddles(b, i, j)) rows[j].push_back(i);

    std::vector<bool> line_row(ny - 1, false);
    for (std::size_t j = 0; j + 1 < ny; ++j)
        line_row[j] = static_cast<double>(rows[j].size()) > o.line_fraction * static_cast<double>(nx);
    for (std::size_t j = 0; j + 1 < ny; ++j) {
        if (!line_row[j]) continue;
        if (j > 0 && line_row[j - 1])
            out.lines.back().eta_high = g.eta(j + 1);
        else
            out.lines.push_back({g.eta(j), g.eta(j + 1)});
    }

    const double grad_scale = std::max(1.0, f.max_speed());
    for (std::size_t j = 0; j + 1 < ny; ++j) {
        if (line_row[j]) continue;
        for (std::size_t i : rows[j]) {
            double xi = (static_cast<double>(i) + 0.5) * g.dx();
            double eta = 0.5 * (g.eta(j) + g.eta(j + 1));
            bool ok = false;
            FieldSample s;
            for (int it = 0; it < o.newton_max_iterations; ++it) {
                s = f.at_reference(xi, eta);
                if (std::hypot(s.d_x(), s.d_y()) < o.newton_tol * grad_scale) {
                    ok = true;
                    break;
                }
                const double det = s.d_xixi * s.d_etaeta - s.d_xieta * s.d_xieta;
                if (det == 0.0 || !std::isfinite(det)) break;
                const double dxi = (s.d_etaeta * s.d_xi - s.d_xieta * s.d_eta) / det;
                const double deta = (s.d_xixi * s.d_eta - s.d_xieta * s.d_xi) / det;
                xi -= dxi;
                eta = std::clamp(eta - deta, -1.0, 1.0);
            }
            // a root that wandered far from its cell belongs to another cell's scan
            const double cx = (static_cast<double>(i) + 0.5) * g.dx();
            double ddx = std::remainder(xi - cx, two_pi);
            const double ceta = 0.5 * (g.eta(j) + g.eta(j + 1));
            if (ok && (std::abs(ddx) > 1.5 * g.dx() || std::abs(eta - ceta) > 1.5 * g.deta())) continue;
            if (!ok) {
                xi = cx;
                eta = ceta;
                s = f.at_reference(xi, eta);
            }
            xi = std::fmod(xi, two_pi);
            if (xi < 0) xi += two_pi;

            CriticalPoint p;
            p.refined = ok;
            p.position = {xi, eta * s.jac};
            p.value = s.value;
            p.gradient_norm = std::hypot(s.d_x(), s.d_y());
            p.on_wall = std::abs(eta) >= 1.0 - 1e-12;
            const double det_ref = s.d_xixi * s.d_etaeta - s.d_xieta * s.d_xieta;
            p.hessian_det = det_ref / (s.jac * s.jac);
            const double hn2 = s.d_xixi * s.d_xixi + 2 * s.d_xieta * s.d_xieta + s.d_etaeta * s.d_etaeta;
            if (!ok || std::abs(det_ref) <= o.degenerate_tol * hn2)
                p.type = CriticalType::Degenerate;
            else
                p.type = det_ref > 0 ? CriticalType::Elliptic : CriticalType::Hyperbolic;

            const bool dup = std::any_of(out.points.begin(), out.points.end(), [&](const CriticalPoint& q) {
                const double qeta = q.position.y / g.jacobian_at(q.position.x, 0);
                return std::abs(std::remainder(q.position.x - xi, two_pi)) <= g.dx() && std::abs(qeta - eta) <= g.deta();
            });
            if (!dup) out.points.push_back(p);
        }
    }
    std::sort(out.points.begin(), out.points.end(), [](const auto& l, const auto& r) {
        return l.position.x != r.position.x ? l.position.x < r.position.x : l.position.y < r.position.y;
    });
    return out;
}

inline CriticalSet find_critical_points(const ScalarField& psi, const CriticalOptions& o = {}) {
    return find_critical_points(FieldInterpolant(psi), o);
}

// ---------------------------------------------------------------- orbits

enum class OrbitStatus { Closed, MaxStepsExceeded, StagnationReached, LeftDomain };

inline std::string to_string(OrbitStatus s) {
    switch (s) {
        case OrbitStatus::Closed: return "closed";
        case OrbitStatus::MaxStepsExceeded: return "max_steps_exceeded";
        case OrbitStatus::StagnationReached: return "stagnation_reached";
        default: return "left_domain";
    }
}

struct Orbit {
    Point2 seed;
    /// Traced points with x unwrapped (not reduced mod 2 pi).
    std::vector<Point2> points;
    OrbitStatus status = OrbitStatus::MaxStepsExceeded;
    bool closed = false;
    int x_winding = 0;
    bool contractible = false;
    double level = 0.0;
    /// max |psi(point) - psi(seed)| along the polyline
    double level_drift = 0.0;
    double length = 0.0;
};

struct TraceOptions {
    /// arc-length step; <= 0 selects min grid spacing / 4
    double step = 0.0;
    std::size_t max_steps = 50000;
    /// <= 0 selects 1e-5 * max|u|
    double stagnation_tol = 0.0;
    /// <= 0 selects 2 * step
    double closure_tol = 0.0;
    /// <= 0 selects 1e-6 * osc(psi)
    double level_drift_tol = 0.0;

    TraceOptions resolved(const FieldInterpolant& f) const {
        TraceOptions r = *this;
        if (r.step <= 0) r.step = f.grid()->min_spacing() / 4.0;
        if (r.stagnation_tol <= 0) r.stagnation_tol = 1e-5 * f.max_speed();
        if (r.closure_tol <= 0) r.closure_tol = 2.0 * r.step;
        if (r.level_drift_tol <= 0) r.level_drift_tol = 1e-6 * std::max(f.oscillation(), std::numeric_limits<double>::min());
        return r;
    }
};

class StagnantSeed : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

/// Pulls p back onto psi = level along the gradient.
inline void project_to_level(const FieldInterpolant& f, Point2& p, double level) {
    for (int k = 0; k < 3; ++k) {
        const FieldSample s = f.at(p);
        const double r = s.value - level;
        const double gx = s.d_x(), gy = s.d_y();
        const double g2 = gx * gx + gy * gy;
        if (g2 == 0.0) return;
        p.x -= r * gx / g2;
        p.y -= r * gy / g2;
        if (std::abs(r) < 1e-15 * (1.0 + std::abs(level))) return;
    }
}

}  // namespace detail

/// RK4 along the unit direction of u = grad-perp psi (arc-length steps), each
/// step projected back onto the seed's level. Closure: the trace leaves the
/// closure ball around the seed (or a 2 pi k translate) and re-enters it.
inline Orbit trace_orbit(const FieldInterpolant& f, Point2 seed, const TraceOptions& opts = {}) {
    const TraceOptions o = opts.resolved(f);
    Orbit orb;
    orb.seed = seed;
    const FieldSample s0 = f.at(seed);
    if (s0.speed() <= o.stagnation_tol) throw StagnantSeed("seed speed below stagnation tolerance");
    orb.level = s0.value;
    orb.points.push_back(seed);

    bool stalled = false;
    auto dir = [&](Point2 p) {
        const FieldSample s = f.at(p);
        const double sp = s.speed();
        if (sp <= o.stagnation_tol) {
            stalled = true;
            return Point2{0.0, 0.0};
        }
        const Point2 u = s.velocity();
        return Point2{u.x / sp, u.y / sp};
    };

    Point2 p = seed;
    bool left = false;
    const double h = o.step;
    for (std::size_t n = 0; n < o.max_steps; ++n) {
        const Point2 k1 = dir(p);
        const Point2 k2 = dir({p.x + 0.5 * h * k1.x, p.y + 0.5 * h * k1.y});
        const Point2 k3 = dir({p.x + 0.5 * h * k2.x, p.y + 0.5 * h * k2.y});
        const Point2 k4 = dir({p.x + h * k3.x, p.y + h * k3.y});
        if (stalled) {
            orb.status = OrbitStatus::StagnationReached;
            return orb;
        }
        Point2 q{p.x + h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x), p.y + h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y)};
        detail::project_to_level(f, q, orb.level);
        if (std::abs(f.eta_of(q)) > 1.0 + 1e-6) {
            orb.status = OrbitStatus::LeftDomain;
            return orb;
        }
        orb.length += std::hypot(q.x - p.x, q.y - p.y);
        p = q;
        orb.points.push_back(p);
        orb.level_drift = std::max(orb.level_drift, std::abs(f.at(p).value - orb.level));

        const double k = std::round((p.x - seed.x) / two_pi);
        const double d = std::hypot(p.x - seed.x - two_pi * k, p.y - seed.y);
        if (!left) {
            if (d > o.closure_tol) left = true;
        } else if (d < o.closure_tol) {
            orb.status = OrbitStatus::Closed;
            orb.closed = true;
            orb.x_winding = static_cast<int>(k);
            orb.contractible = orb.x_winding == 0;
            return orb;
        }
    }
    orb.status = OrbitStatus::MaxStepsExceeded;
    return orb;
}

inline Orbit trace_orbit(const ScalarField& psi, Point2 seed, double step = 0.0, std::size_t max_steps = 50000) {
    TraceOptions o;
    o.step = step;
    o.max_steps = max_steps;
    return trace_orbit(FieldInterpolant(psi), seed, o);
}

/// Even-odd point-in-polygon on a closed polyline, testing the 2 pi k
/// translates of p that fall within the polyline's x-range.
inline bool encloses(const std::vector<Point2>& poly, Point2 p) {
    if (poly.size() < 3) return false;
    double xmin = poly[0].x, xmax = poly[0].x;
    for (const auto& q : poly) {
        xmin = std::min(xmin, q.x);
        xmax = std::max(xmax, q.x);
    }
    for (double k = std::floor((xmin - p.x) / two_pi); p.x + two_pi * k <= xmax; k += 1.0) {
        const double px = p.x + two_pi * k;
        if (px < xmin) continue;
        bool in = false;
        for (std::size_t a = 0, b = poly.size() - 1; a < poly.size(); b = a++) {
            const Point2 &u = poly[a], &v = poly[b];
            if ((u.y > p.y) != (v.y > p.y) && px < (v.x - u.x) * (p.y - u.y) / (v.y - u.y) + u.x) in = !in;
        }
        if (in) return true;
    }
    return false;
}

// ---------------------------------------------------------------- symmetry & centerline

/// max |psi(i, j) - psi(i, ny - 1 - j)|, exact array reflection.
inline double symmetry_residual(const ScalarField& psi) {
    const ChannelGrid& g = psi.g();
    double r = 0.0;
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) r = std::max(r, std::abs(psi(i, j) - psi(i, g.ny() - 1 - j)));
    return r;
}

enum class CenterlineClass { Stagnant, Contractible, Wrapping, SeparatrixAdjacent, Unresolved };

inline std::string to_string(CenterlineClass c) {
    switch (c) {
        case CenterlineClass::Stagnant: return "stagnant";
        case CenterlineClass::Contractible: return "contractible";
        case CenterlineClass::Wrapping: return "wrapping";
        case CenterlineClass::SeparatrixAdjacent: return "separatrix_adjacent";
        default: return "unresolved";
    }
}

struct CenterlineSample {
    Point2 point;
    double abs_u2 = 0.0;
    CenterlineClass classification = CenterlineClass::Stagnant;
};

struct CenterlineReport {
    std::vector<CenterlineSample> samples;
    double symmetry_residual = 0.0;
    bool symmetric = true;

    std::size_t count(CenterlineClass c) const {
        return static_cast<std::size_t>(
            std::count_if(samples.begin(), samples.end(), [c](const auto& s) { return s.classification == c; }));
    }
    /// Non-stagnant samples, separatrix-adjacent ones excluded.
    std::size_t tested() const { return samples.size() - count(CenterlineClass::Stagnant) - count(CenterlineClass::SeparatrixAdjacent); }
    double contractible_fraction() const {
        const std::size_t n = tested();
        return n == 0 ? 0.0 : static_cast<double>(count(CenterlineClass::Contractible)) / static_cast<double>(n);
    }
};

inline CenterlineClass classify_orbit(const Orbit& o) {
    switch (o.status) {
        case OrbitStatus::Closed: return o.contractible ? CenterlineClass::Contractible : CenterlineClass::Wrapping;
        case OrbitStatus::StagnationReached: return CenterlineClass::SeparatrixAdjacent;
        default: return CenterlineClass::Unresolved;
    }
}

inline CenterlineReport centerline_island_test(const FieldInterpolant& f, std::size_t n_samples = 64,
                                               const TraceOptions& opts = {}, double symmetry_tol = 1e-6) {
    const TraceOptions o = opts.resolved(f);
    CenterlineReport rep;
    rep.symmetry_residual = symmetry_residual(f.field());
    rep.symmetric = rep.symmetry_residual <= symmetry_tol * std::max(1.0, f.field().max_abs());
    for (std::size_t k = 0; k < n_samples; ++k) {
        CenterlineSample s;
        s.point = {two_pi * (static_cast<double>(k) + 0.5) / static_cast<double>(n_samples), 0.0};
        s.abs_u2 = std::abs(f.at(s.point).d_x());
        if (s.abs_u2 > o.stagnation_tol) s.classification = classify_orbit(trace_orbit(f, s.point, o));
        rep.samples.push_back(s);
    }
    return rep;
}

inline CenterlineReport centerline_island_test(const EquilibriumSolution& sol, std::size_t n_samples = 64,
                                               const TraceOptions& opts = {}) {
    return centerline_island_test(FieldInterpolant(sol.psi), n_samples, opts);
}

// ---------------------------------------------------------------- classification

struct TopologyOptions {
    TraceOptions trace;
    CriticalOptions critical;
    std::size_t centerline_samples = 64;
    /// regular seed lattice (x by eta), walls excluded
    std::size_t seeds_x = 8;
    std::size_t seeds_eta = 7;
};

struct TopologyReport {
    CriticalSet critical;
    std::size_t islands = 0;
    /// one contractible orbit around each island center
    std::vector<Orbit> island_orbits;
    std::size_t wrapping_orbits = 0;
    std::vector<Orbit> orbits;
    double symmetry_residual = 0.0;
    CenterlineReport centerline;
    double max_level_drift = 0.0;
};

inline TopologyReport classify_field(const ScalarField& psi, const TopologyOptions& opts = {}) {
    const FieldInterpolant f(psi);
    const TraceOptions o = opts.trace.resolved(f);
    const ChannelGrid& g = *f.grid();
    TopologyReport rep;
    rep.critical = find_critical_points(f, opts.critical);
    rep.symmetry_residual = symmetry_residual(psi);
    rep.centerline = centerline_island_test(f, opts.centerline_samples, o);

    auto try_trace = [&](Point2 seed, const TraceOptions& to) -> std::optional<Orbit> {
        if (f.at(seed).speed() <= to.stagnation_tol) return std::nullopt;
        Orbit orb = trace_orbit(f, seed, to);
        rep.max_level_drift = std::max(rep.max_level_drift, orb.level_drift);
        return orb;
    };

    // seeds next to each elliptic center, on a widening ladder of offsets in
    // both directions (pockets can be a few cells thin): small closed orbits
    // exist around any nondegenerate center
    for (const auto& c : rep.critical.points) {
        if (c.type != CriticalType::Elliptic || c.on_wall) continue;
        const double J = g.jacobian_at(c.position.x, 0);
        bool found = false;
        for (double mult : {0.25, 0.5, 1.0, 3.0, 6.0, 12.0, 24.0}) {
            // trace step scaled with the offset so the orbit can leave the closure ball
            TraceOptions local = o;
            local.step = std::min(o.step, mult * o.step / 4.0);
            local.closure_tol = 2.0 * local.step;
            local.max_steps = o.max_steps * static_cast<std::size_t>(std::ceil(o.step / local.step));
            for (double sign : {1.0, -1.0}) {
                const double eta = (c.position.y + sign * mult * o.step) / J;
                if (std::abs(eta) >= 1.0) continue;
                auto orb = try_trace({c.position.x, eta * J}, local);
                if (!orb) continue;
                found = orb->contractible && encloses(orb->points, c.position);
                rep.orbits.push_back(std::move(*orb));
                if (found) break;
            }
            if (found) break;
        }
    }
    for (std::size_t a = 0; a < opts.seeds_x; ++a)
        for (std::size_t b = 0; b < opts.seeds_eta; ++b) {
            const double x = two_pi * (static_cast<double>(a) + 0.25) / static_cast<double>(opts.seeds_x);
            const double eta = -1.0 + 2.0 * (static_cast<double>(b) + 1.0) / static_cast<double>(opts.seeds_eta + 1);
            if (auto orb = try_trace({x, eta * g.jacobian_at(x, 0)}, o)) rep.orbits.push_back(std::move(*orb));
        }

    for (const auto& orb : rep.orbits)
        if (orb.closed && orb.x_winding != 0) ++rep.wrapping_orbits;
    for (const auto& c : rep.critical.points) {
        if (c.type != CriticalType::Elliptic) continue;
        for (const auto& orb : rep.orbits)
            if (orb.contractible && encloses(orb.points, c.position)) {
                ++rep.islands;
                rep.island_orbits.push_back(orb);
                break;
            }
    }
    return rep;
}

inline TopologyReport classify_flow(const EquilibriumSolution& sol, const TopologyOptions& opts = {}) {
    return classify_field(sol.psi, opts);
}

// ---------------------------------------------------------------- contours

/// Marching squares on the reference grid (periodic in xi). Segments are
/// returned in physical coordinates, each inside one cell; the endpoints
/// carry the id of the grid edge they lie on.
struct Segment {
    Point2 a, b;
    std::size_t edge_a = 0, edge_b = 0;
};

inline std::vector<Segment> contour_segments(const ScalarField& psi, double level) {
    const ChannelGrid& g = psi.g();
    const std::size_t nx = g.nx(), ny = g.ny();
    std::vector<Segment> out;
    // Edge ids: 2 (j nx + i) for (i, j)-(i+1, j), 2 (j nx + i) + 1 for (i, j)-(i, j+1).
    // Crossings are computed from the edge's canonical node order so both
    // neighbouring cells produce bit-identical points.
    auto crossing = [&](std::size_t i, std::size_t j, bool vertical, double x_base) {
        const std::size_t i1 = (i + 1) % nx;
        const double va = psi(i, j), vb = vertical ? psi(i, j + 1) : psi(i1, j);
        const double t = (level - va) / (vb - va);
        const double xi = vertical ? x_base : x_base + t * g.dx();
        const double eta = vertical ? g.eta(j) + t * (g.eta(j + 1) - g.eta(j)) : g.eta(j);
        return Point2{xi, eta * g.jacobian_at(std::fmod(xi, two_pi), 0)};
    };
    for (std::size_t j = 0; j + 1 < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t i1 = (i + 1) % nx;
            const double x0 = static_cast<double>(i) * g.dx(), x1 = static_cast<double>(i + 1) * g.dx();
            // corners counter-clockwise: (i,j) (i+1,j) (i+1,j+1) (i,j+1)
            const std::array<double, 4> v{psi(i, j), psi(i1, j), psi(i1, j + 1), psi(i, j + 1)};
            int mask = 0;
            for (int k = 0; k < 4; ++k)
                if (v[static_cast<std::size_t>(k)] >= level) mask |= 1 << k;
            if (mask == 0 || mask == 15) continue;
            // cell edge e joins corner e and e+1: bottom, right, top, left
            auto edge_point = [&](int e) -> std::pair<Point2, std::size_t> {
                switch (e) {
                    case 0: return {crossing(i, j, false, x0), 2 * (j * nx + i)};
                    case 1: return {crossing(i1, j, true, x1), 2 * (j * nx + i1) + 1};
                    case 2: return {crossing(i, j + 1, false, x0), 2 * ((j + 1) * nx + i)};
                    default: return {crossing(i, j, true, x0), 2 * (j * nx + i) + 1};
                }
            };
            auto add = [&](int e, int f) {
                const auto [pa, ea] = edge_point(e);
                const auto [pb, eb] = edge_point(f);
                out.push_back({pa, pb, ea, eb});
            };
            std::vector<int> edges;
            for (int e = 0; e < 4; ++e)
                if (((mask >> e) & 1) != ((mask >> ((e + 1) % 4)) & 1)) edges.push_back(e);
            if (edges.size() == 2) {
                add(edges[0], edges[1]);
            } else {
                // saddle cell: corners 0 and 2 on one side; the cell average decides
                const bool center_above = 0.25 * (v[0] + v[1] + v[2] + v[3]) >= level;
                if (center_above == static_cast<bool>(mask & 1)) {
                    add(0, 1);
                    add(2, 3);
                } else {
                    add(3, 0);
                    add(1, 2);
                }
            }
        }
    return out;
}

struct Contour {
    /// x unwrapped along the polyline
    std::vector<Point2> points;
    bool closed = false;
    int x_winding = 0;
};

/// Links marching-squares segments into polylines through shared edges.
inline std::vector<Contour> extract_contours(const ScalarField& psi, double level) {
    const auto segs = contour_segments(psi, level);
    // (edge id, segment end id) sorted by edge; end id = 2 seg + (0: a, 1: b)
    std::vector<std::pair<std::size_t, std::size_t>> ends;
    ends.reserve(2 * segs.size());
    for (std::size_t k = 0; k < segs.size(); ++k) {
        ends.emplace_back(segs[k].edge_a, 2 * k);
        ends.emplace_back(segs[k].edge_b, 2 * k + 1);
    }
    std::sort(ends.begin(), ends.end());
    auto edge_of = [&](std::size_t end_id) { return end_id % 2 ? segs[end_id / 2].edge_b : segs[end_id / 2].edge_a; };
    auto partner = [&](std::size_t end_id) -> std::optional<std::size_t> {
        const std::size_t e = edge_of(end_id);
        auto it = std::lower_bound(ends.begin(), ends.end(), std::pair<std::size_t, std::size_t>{e, 0});
        for (; it != ends.end() && it->first == e; ++it)
            if (it->second / 2 != end_id / 2) return it->second;
        return std::nullopt;
    };

    std::vector<bool> used(segs.size(), false);
    std::vector<Contour> out;
    for (std::size_t s0 = 0; s0 < segs.size(); ++s0) {
        if (used[s0]) continue;
        used[s0] = true;
        // walk forward from b, then (if open) backward from a
        std::vector<Point2> fwd{segs[s0].a, segs[s0].b}, bwd;
        bool closed = false;
        for (int pass = 0; pass < 2 && !closed; ++pass) {
            std::size_t end = pass == 0 ? 2 * s0 + 1 : 2 * s0;
            std::vector<Point2>& acc = pass == 0 ? fwd : bwd;
            while (true) {
                const auto nb = partner(end);
                if (!nb) break;
                const std::size_t seg = *nb / 2;
                if (seg == s0) {
                    closed = true;
                    break;
                }
                if (used[seg]) break;
                used[seg] = true;
                const bool enter_a = *nb % 2 == 0;
                acc.push_back(enter_a ? segs[seg].b : segs[seg].a);
                end = enter_a ? 2 * seg + 1 : 2 * seg;
            }
        }
        std::vector<Point2> raw(bwd.rbegin(), bwd.rend());
        raw.insert(raw.end(), fwd.begin(), fwd.end());
        Contour c;
        c.points.reserve(raw.size());
        double offset = 0.0;
        for (std::size_t k = 0; k < raw.size(); ++k) {
            Point2 p = raw[k];
            if (k > 0) {
                p.x += offset;
                const double jump = std::round((p.x - c.points.back().x) / two_pi);
                offset -= jump * two_pi;
                p.x -= jump * two_pi;
            }
            c.points.push_back(p);
        }
        c.closed = closed;
        // closed walks end on the start point (up to a 2 pi translate)
        if (closed) c.x_winding = static_cast<int>(std::round((c.points.back().x - c.points.front().x) / two_pi));
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace cateye
