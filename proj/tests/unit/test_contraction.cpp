#include "doctest.h"

#include <cmath>
#include <vector>

#include "voxmarch/contraction.hpp"
#include "voxmarch/rng.hpp"

using namespace voxmarch;

TEST_CASE("sphere contraction is the identity inside the unit ball") {
    Vec3 u{0.3, -0.4, 0.0};  // norm 0.5
    Vec3 c = contract_to_ball(u);
    CHECK(norm(c) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c.x == doctest::Approx(u.x));
    CHECK(c.y == doctest::Approx(u.y));
    CHECK(c.z == doctest::Approx(u.z));
}

TEST_CASE("sphere contraction maps (2,0,0) to (1.5,0,0) before the affine map") {
    Vec3 c = contract_to_ball({2.0, 0.0, 0.0});
    CHECK(c.x == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(c.y == 0.0);
    CHECK(c.z == 0.0);

    // and the grid-domain point after mapping [-2,2]^3 -> [0,1]^3
    Contraction sphere = Contraction::sphere({0, 0, 0}, 1.0);
    Vec3 g = contract(sphere, {2.0, 0.0, 0.0});
    CHECK(g.x == doctest::Approx((1.5 + 2.0) / 4.0));
    CHECK(g.y == doctest::Approx(0.5));
    CHECK(g.z == doctest::Approx(0.5));
}

TEST_CASE("contracted norm approaches 2 monotonically over a radius sweep") {
    // numeric sweep oracle: log-spaced radii in [1, 1e6]
    double prev = 0.0;
    for (int i = 0; i <= 600; ++i) {
        double r = std::pow(10.0, 6.0 * i / 600.0);
        Vec3 c = contract_to_ball({r, 0.0, 0.0});
        double cr = norm(c);
        CHECK(cr < 2.0);
        CHECK(cr >= prev);
        prev = cr;
    }
    CHECK(prev > 2.0 - 1e-5);
}

TEST_CASE("contraction is continuous at the unit sphere") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        Vec3 v = normalize(Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        Vec3 inside = contract_to_ball(v * (1.0 - 1e-9));
        Vec3 outside = contract_to_ball(v * (1.0 + 1e-9));
        CHECK(norm(inside - outside) < 1e-6);
        Vec3 at = contract_to_ball(v);
        CHECK(norm(at - v) < 1e-12);  // both branches equal u at the boundary
    }
}

TEST_CASE("contraction is injective on random point pairs") {
    Contraction sphere = Contraction::sphere({0.1, -0.2, 0.3}, 1.5);
    Rng rng(13);
    std::vector<Vec3> points;
    for (int i = 0; i < 64; ++i)
        points.push_back(Vec3{rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20)});
    for (size_t a = 0; a < points.size(); ++a)
        for (size_t b = a + 1; b < points.size(); ++b) {
            if (norm(points[a] - points[b]) <= 1e-6) continue;
            CHECK(norm(contract(sphere, points[a]) - contract(sphere, points[b])) > 0.0);
        }
}

TEST_CASE("contracted norms preserve radial order") {
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        Vec3 dir = normalize(Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        double r1 = rng.uniform(0.0, 50.0);
        double r2 = rng.uniform(0.0, 50.0);
        if (r1 == r2) continue;
        if (r1 > r2) std::swap(r1, r2);
        double c1 = norm(contract_to_ball(dir * r1));
        double c2 = norm(contract_to_ball(dir * r2));
        CHECK(c1 < c2);
    }
}

TEST_CASE("is_inside_domain") {
    Contraction box = Contraction::aabb_normalize(Aabb({0, 0, 0}, {1, 1, 1}));
    CHECK_FALSE(is_inside_domain(box, {2, 0, 0}));
    CHECK(is_inside_domain(box, {0.5, 0.5, 0.5}));

    Contraction sphere = Contraction::sphere({0, 0, 0}, 1.0);
    Rng rng(19);
    for (int i = 0; i < 100; ++i) {
        Vec3 p{rng.uniform(-1e5, 1e5), rng.uniform(-1e5, 1e5), rng.uniform(-1e5, 1e5)};
        CHECK(is_inside_domain(sphere, p));
    }
}

TEST_CASE("non-finite input is rejected") {
    Contraction box = Contraction::aabb_normalize(Aabb({0, 0, 0}, {1, 1, 1}));
    CHECK_THROWS_WITH_AS(contract(box, {std::nan(""), 0, 0}), "non-finite coordinate",
                         std::invalid_argument);
}

TEST_CASE("grid points invert back to world space") {
    Contraction sphere = Contraction::sphere({0.5, 0.5, 0.5}, 2.0);
    Contraction box = Contraction::aabb_normalize(Aabb({-1, -2, 0}, {3, 2, 5}));
    Rng rng(23);
    for (int i = 0; i < 200; ++i) {
        Vec3 p{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)};
        auto back = invert_grid_point(sphere, contract(sphere, p));
        REQUIRE(back.has_value());
        CHECK(norm(*back - p) < 1e-9 * (1.0 + norm(p)));

        Vec3 q{rng.uniform(-1, 3), rng.uniform(-2, 2), rng.uniform(0, 5)};
        auto back_box = invert_grid_point(box, contract(box, q));
        REQUIRE(back_box.has_value());
        CHECK(norm(*back_box - q) < 1e-12);
    }
    // no finite preimage at contracted radius >= 2 (grid-domain corner)
    CHECK_FALSE(invert_grid_point(sphere, {1.0, 1.0, 1.0}).has_value());
}
