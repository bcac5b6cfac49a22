#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "cateye/geometry.hpp"

using namespace cateye;
using Catch::Approx;

TEST_CASE("profile evaluation", "[geometry]") {
    const auto h = BoundaryProfile::cosine(0.1);
    CHECK(eval_profile(h, 0.0) == 0.1);
    CHECK(std::abs(eval_profile(h, std::numbers::pi / 2)) < 1e-15);
    CHECK(eval_profile(BoundaryProfile::flat(), 1.234) == 0.0);
    CHECK(BoundaryProfile::flat().is_flat());
    CHECK_FALSE(h.is_flat());
    CHECK(BoundaryProfile({{0, 0.2}}, {}).is_flat());
    CHECK(BoundaryProfile({{3, 0.0}}, {{2, 0.0}}).is_flat());
}

TEST_CASE("profile derivatives agree with finite differences", "[geometry]") {
    const BoundaryProfile h({{1, 0.1}, {3, -0.05}}, {{2, 0.07}});
    const double d = 1e-4;
    for (double x : {0.0, 0.3, 1.7, 4.0, 6.0}) {
        for (int n = 0; n < 4; ++n) {
            const double fd = (h.derivative(x + d, n) - h.derivative(x - d, n)) / (2 * d);
            CHECK(h.derivative(x, n + 1) == Approx(fd).margin(1e-6));
        }
    }
}

TEST_CASE("profile rejects |h| >= 1", "[geometry]") {
    CHECK_THROWS_AS(BoundaryProfile::cosine(1.0).validate(), GeometryError);
    CHECK_THROWS_AS(build_grid(BoundaryProfile::cosine(1.2), 16, 17), GeometryError);
    CHECK_NOTHROW(BoundaryProfile::cosine(0.99).validate());
    // max found by dense sampling, not just at x = 0
    CHECK_THROWS_AS(BoundaryProfile({}, {{5, 1.01}}).validate(), GeometryError);
}

TEST_CASE("grid construction", "[geometry]") {
    SECTION("flat grid is the identity map") {
        auto g = build_grid(BoundaryProfile::flat(), 16, 17);
        for (std::size_t i = 0; i < g->nx(); ++i) CHECK(g->jacobian(i) == 1.0);
        for (std::size_t j = 0; j < g->ny(); ++j) {
            auto [x, y] = g->physical_coords(3, j);
            CHECK(x == Approx(3 * two_pi / 16));
            CHECK(y == g->eta(j));
        }
        CHECK(g->physical_coords(5, g->center_row()).second == 0.0);
    }
    SECTION("curved grid") {
        auto g = build_grid(BoundaryProfile::cosine(0.1), 16, 17);
        CHECK(g->physical_coords(0, g->ny() - 1).second == Approx(1.1));
        CHECK(g->physical_coords(8, g->ny() - 1).second == Approx(0.9));
        CHECK(g->physical_coords(0, 0).second == Approx(-1.1));
        double jmax = 0, jmin = 10;
        for (std::size_t i = 0; i < g->nx(); ++i) {
            jmax = std::max(jmax, g->jacobian(i));
            jmin = std::min(jmin, g->jacobian(i));
        }
        // dense sampling of 1 + h
        double smax = 0, smin = 10;
        for (int k = 0; k < 10000; ++k) {
            const double v = 1.0 + 0.1 * std::cos(two_pi * k / 10000.0);
            smax = std::max(smax, v);
            smin = std::min(smin, v);
        }
        CHECK(jmax == Approx(smax).epsilon(1e-12));
        CHECK(jmin == Approx(smin).epsilon(1e-12));
    }
    SECTION("rejections") {
        CHECK_THROWS_AS(build_grid(BoundaryProfile::flat(), 16, 18), GeometryError);
        CHECK_THROWS_AS(build_grid(BoundaryProfile::flat(), 15, 17), GeometryError);
        CHECK_THROWS_AS(build_grid(BoundaryProfile::flat(), 16, 15), GeometryError);
        auto g = build_grid(BoundaryProfile::flat(), 16, 17);
        CHECK_THROWS_AS(g->physical_coords(16, 0), std::out_of_range);
        CHECK_THROWS_AS(g->physical_coords(0, 17), std::out_of_range);
    }
}

TEST_CASE("grid reflection symmetry is exact", "[geometry][property]") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> amp(-0.15, 0.15);
    for (int trial = 0; trial < 10; ++trial) {
        BoundaryProfile p({{1, amp(rng)}, {2, amp(rng)}}, {{1, amp(rng)}, {3, amp(rng)}});
        auto g = build_grid(p, 32, 33);
        for (std::size_t j = 0; j < g->ny(); ++j)
            for (std::size_t i = 0; i < g->nx(); ++i) {
                auto [x1, y1] = g->physical_coords(i, j);
                auto [x2, y2] = g->physical_coords(i, g->ny() - 1 - j);
                REQUIRE(x1 == x2);
                REQUIRE(y1 == -y2);
            }
        for (std::size_t i = 0; i < g->nx(); ++i) {
            REQUIRE(g->h_prime(i) == p.derivative(g->x(i), 1));
            REQUIRE(g->h_second(i) == p.derivative(g->x(i), 2));
            REQUIRE(g->jacobian(i) > 0.0);
        }
    }
}

TEST_CASE("scalar field basics", "[geometry]") {
    auto g = build_grid(BoundaryProfile::cosine(0.1), 16, 17);
    auto f = ScalarField::sample(g, [](double x, double y) { return x + 10 * y; });
    CHECK(f(2, 3) == Approx(g->x(2) + 10 * g->eta(3) * g->jacobian(2)));
    CHECK(f.all_finite());
    CHECK_THROWS_AS(ScalarField(g, std::vector<double>(3)), GeometryError);
}
