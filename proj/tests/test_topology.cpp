#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "cateye/topology.hpp"

using namespace cateye;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

GridPtr stuart_grid() { return build_grid(BoundaryProfile::flat(), 256, 129, 2.0); }

double nearest_vertex(const std::vector<Point2>& poly, Point2 p) {
    double d = 1e300;
    for (const auto& q : poly) {
        const double dx = std::remainder(q.x - p.x, 2 * pi);
        d = std::min(d, std::hypot(dx, q.y - p.y));
    }
    return d;
}

// distance from p to a polyline (segments), x taken mod 2 pi
double polyline_distance(const std::vector<Point2>& poly, Point2 p) {
    double d = 1e300;
    for (std::size_t k = 0; k + 1 < poly.size(); ++k) {
        Point2 a = poly[k], b = poly[k + 1];
        const double shift = std::round((a.x - p.x) / (2 * pi)) * 2 * pi;
        a.x -= shift;
        b.x -= shift;
        const double vx = b.x - a.x, vy = b.y - a.y;
        const double l2 = vx * vx + vy * vy;
        double t = l2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / l2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        d = std::min(d, std::hypot(a.x + t * vx - p.x, a.y + t * vy - p.y));
    }
    return d;
}

}  // namespace

TEST_CASE("shear flow has a critical line, not points", "[topology]") {
    auto g = build_grid(BoundaryProfile::flat(), 64, 33);
    const auto psi = ScalarField::sample(g, [](double, double y) { return -0.5 * y * y; });
    const auto cs = find_critical_points(psi);
    CHECK(cs.points.empty());
    REQUIRE(cs.lines.size() == 1);
    CHECK(cs.lines[0].eta() == Approx(0.0).margin(1e-12));
}

TEST_CASE("Stuart field critical points", "[topology]") {
    auto g = stuart_grid();
    const auto cs = find_critical_points(stuart_field(g));
    CHECK(cs.lines.empty());
    REQUIRE(cs.points.size() == 2);
    CHECK(cs.count(CriticalType::Elliptic) == 1);
    CHECK(cs.count(CriticalType::Hyperbolic) == 1);
    // analytic: grad exp(psi) = (-sin x, sqrt2 sinh y); Hess psi = Hess exp(psi) / exp(psi) there.
    // Determinants come from the interpolant's second derivatives, good to O(dx^2).
    const double s2 = std::sqrt(2.0);
    for (const auto& p : cs.points) {
        CHECK(p.refined);
        CHECK(p.gradient_norm < 1e-10);
        CHECK(std::abs(p.position.y) < 1e-6);
        if (p.type == CriticalType::Hyperbolic) {
            CHECK(std::abs(std::remainder(p.position.x, 2 * pi)) < 1e-6);
            CHECK(p.hessian_det == Approx(-s2 / ((s2 + 1) * (s2 + 1))).epsilon(1e-2));
        } else {
            CHECK(std::abs(p.position.x - pi) < 1e-6);
            CHECK(p.hessian_det == Approx(s2 / ((s2 - 1) * (s2 - 1))).epsilon(1e-2));
            CHECK(p.value == Approx(std::log(s2 - 1)).epsilon(1e-6));
        }
    }
}

TEST_CASE("Couette orbit wraps once", "[topology]") {
    auto g = build_grid(BoundaryProfile::flat(), 64, 33);
    const auto psi = ScalarField::sample(g, [](double, double y) { return -0.5 * y * y; });
    const auto orb = trace_orbit(psi, {0.0, 0.5});
    CHECK(orb.status == OrbitStatus::Closed);
    CHECK(orb.x_winding == 1);
    CHECK_FALSE(orb.contractible);
    CHECK(orb.length == Approx(2 * pi).epsilon(1e-2));
    for (const auto& p : orb.points) REQUIRE(p.y == Approx(0.5).margin(1e-9));
    // reversed flow direction below the centerline
    CHECK(trace_orbit(psi, {0.0, -0.5}).x_winding == -1);
    CHECK_THROWS_AS(trace_orbit(psi, {1.0, 0.0}), StagnantSeed);
}

TEST_CASE("Stuart orbits against the level-set oracle", "[topology]") {
    auto g = stuart_grid();
    const auto psi = stuart_field(g);
    const FieldInterpolant f(psi);
    const TraceOptions o = TraceOptions{}.resolved(f);

    SECTION("inside the eye") {
        const Point2 seed{pi, 0.1};
        const auto orb = trace_orbit(f, seed);
        REQUIRE(orb.status == OrbitStatus::Closed);
        CHECK(orb.contractible);
        CHECK(orb.x_winding == 0);
        CHECK(orb.level_drift < o.level_drift_tol);
        CHECK(encloses(orb.points, {pi, 0.0}));
        CHECK_FALSE(encloses(orb.points, {0.0, 0.0}));

        // marching squares at the same level: the contour through the seed is closed, winding 0
        const auto contours = extract_contours(psi, orb.level);
        const Contour* near = nullptr;
        double best = 1e300;
        for (const auto& c : contours) {
            const double d = polyline_distance(c.points, seed);
            if (d < best) {
                best = d;
                near = &c;
            }
        }
        REQUIRE(near != nullptr);
        CHECK(best < 1e-3);
        CHECK(near->closed);
        CHECK(near->x_winding == 0);
        double hausdorff = 0.0;
        for (std::size_t k = 0; k < orb.points.size(); k += 7)
            hausdorff = std::max(hausdorff, polyline_distance(near->points, orb.points[k]));
        // marching squares interpolates linearly along cell edges: O(dx^2) apart
        CHECK(hausdorff < 5.0 * g->dx() * g->dx());
        // the traced points sit on the analytic level set
        double level_err = 0.0;
        for (const auto& p : orb.points)
            level_err = std::max(level_err, std::abs(std::log(std::sqrt(2.0) * std::cosh(p.y) + std::cos(p.x)) - orb.level));
        CHECK(level_err < 1e-6);
    }
    SECTION("outside the eye, above the hyperbolic point") {
        // (0, 0) is the saddle, so (0, 0.1) lies on a channel-wrapping streamline
        const auto orb = trace_orbit(f, {0.0, 0.1});
        REQUIRE(orb.status == OrbitStatus::Closed);
        CHECK(std::abs(orb.x_winding) == 1);
        CHECK_FALSE(orb.contractible);
    }
    SECTION("reflection pairing") {
        const auto up = trace_orbit(f, {2.5, 0.3});
        const auto down = trace_orbit(f, {2.5, -0.3});
        REQUIRE(up.closed);
        REQUIRE(down.closed);
        CHECK(up.x_winding == down.x_winding);
        for (const auto& p : down.points) REQUIRE(nearest_vertex(up.points, {p.x, -p.y}) < 2 * o.closure_tol);
        // orientation reverses: the reflected field is -R u, so u1 flips and u2 keeps its sign
        const Point2 vu = f.at(up.seed).velocity(), vd = f.at(down.seed).velocity();
        CHECK(vd.x == Approx(-vu.x).margin(1e-12));
        CHECK(vd.y == Approx(vu.y).margin(1e-12));
        CHECK((up.points[1].x - up.points[0].x) * (down.points[1].x - down.points[0].x) < 0.0);
    }
    SECTION("contractibility does not depend on the seed") {
        for (const Point2 seed : {Point2{pi, 0.4}, Point2{1.0, 1.2}}) {
            const auto orb = trace_orbit(f, seed);
            REQUIRE(orb.closed);
            const auto again = trace_orbit(f, orb.points[orb.points.size() / 3]);
            REQUIRE(again.closed);
            CHECK(again.x_winding == orb.x_winding);
        }
    }
}

TEST_CASE("symmetry residual", "[topology]") {
    auto g = build_grid(BoundaryProfile::cosine(0.1), 32, 17);
    CHECK(symmetry_residual(ScalarField::sample(g, [](double x, double y) { return std::cos(y) * std::sin(x); })) == 0.0);
    CHECK(symmetry_residual(ScalarField::sample(g, [](double, double y) { return y; })) == Approx(2.2).epsilon(1e-14));
}

TEST_CASE("contours of simple fields", "[topology]") {
    auto g = build_grid(BoundaryProfile::cosine(0.1), 32, 17);
    const auto y = ScalarField::sample(g, [](double, double yy) { return yy; });
    const auto cs = extract_contours(y, 0.3);
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].closed);
    CHECK(std::abs(cs[0].x_winding) == 1);
    for (const auto& p : cs[0].points) REQUIRE(p.y == Approx(0.3).margin(2e-3));
    CHECK(extract_contours(y, 5.0).empty());
}

TEST_CASE("point in polygon with periodic translates", "[topology]") {
    const std::vector<Point2> sq{{6.0, -0.2}, {6.6, -0.2}, {6.6, 0.2}, {6.0, 0.2}};
    CHECK(encloses(sq, {6.3, 0.0}));
    CHECK(encloses(sq, {6.3 - 2 * pi, 0.0}));
    CHECK_FALSE(encloses(sq, {6.3, 0.5}));
    CHECK_FALSE(encloses(sq, {1.0, 0.0}));
}

TEST_CASE("shear flows have no islands", "[topology]") {
    SECTION("Couette centerline is all stagnant") {
        auto g = build_grid(BoundaryProfile::flat(), 64, 33);
        const auto psi = ScalarField::sample(g, [](double, double y) { return -0.5 * y * y; });
        const auto rep = centerline_island_test(FieldInterpolant(psi), 32);
        CHECK(rep.samples.size() == 32);
        CHECK(rep.count(CenterlineClass::Stagnant) == 32);
        CHECK(rep.tested() == 0);
    }
    SECTION("flat channel Constant(1)") {
        auto g = build_grid(BoundaryProfile::flat(), 64, 33);
        const auto sol = solve_equilibrium(g, VorticityProfile::constant(1.0), 0.0);
        const auto rep = classify_flow(sol);
        CHECK(rep.islands == 0);
        CHECK(rep.wrapping_orbits > 0);
        CHECK(rep.centerline.tested() == 0);
        CHECK(rep.critical.lines.size() == 1);
        CHECK(rep.critical.count(CriticalType::Elliptic) == 0);
    }
}

TEST_CASE("curved channel Constant(1) has a cat's eye", "[topology]") {
    auto g = build_grid(BoundaryProfile::cosine(0.1), 128, 65);
    const auto sol = solve_equilibrium(g, VorticityProfile::constant(1.0), 0.0);
    const auto rep = classify_flow(sol);
    INFO("critical points " << rep.critical.points.size());
    CHECK(rep.symmetry_residual < 1e-6);
    std::size_t on_center = 0;
    for (const auto& p : rep.critical.points)
        if (std::abs(p.position.y) < 1e-6) ++on_center;
    CHECK(on_center >= 2);
    CHECK(rep.critical.count(CriticalType::Elliptic) >= 1);
    CHECK(rep.critical.count(CriticalType::Hyperbolic) >= 1);
    CHECK(rep.islands >= 1);
    CHECK(rep.max_level_drift < 1e-6 * FieldInterpolant(sol.psi).oscillation());

    const auto& cl = rep.centerline;
    CHECK(cl.symmetric);
    REQUIRE(cl.tested() > 0);
    CHECK(cl.contractible_fraction() >= 0.9);
    CHECK(cl.count(CenterlineClass::Wrapping) == 0);

    // the centerline point of largest |u2| lies on a contractible orbit
    const FieldInterpolant f(sol.psi);
    Point2 best{};
    double umax = 0.0;
    for (std::size_t i = 0; i < g->nx(); ++i) {
        const double u2 = std::abs(f.at_reference(g->x(i), 0.0).d_x());
        if (u2 > umax) {
            umax = u2;
            best = {g->x(i), 0.0};
        }
    }
    const auto orb = trace_orbit(f, best);
    CHECK(orb.status == OrbitStatus::Closed);
    CHECK(orb.contractible);
}
