#include "doctest.h"

#include <cmath>
#include <sstream>

#include "voxmarch/fields.hpp"
#include "voxmarch/rng.hpp"

using namespace voxmarch;

namespace {

bool close_rel(double a, double b, double rel = 1e-5, double abs_floor = 1e-8) {
    return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs_floor);
}

}  // namespace

TEST_CASE("solid sphere density is the scaled indicator") {
    AnalyticField field = SolidSphere{{0.5, 0.5, 0.5}, 0.2, 10.0, {1, 0, 0}};
    CHECK(density_at(field, {0.5 + 0.9 * 0.2, 0.5, 0.5}) == 10.0);
    CHECK(density_at(field, {0.5 + 1.1 * 0.2, 0.5, 0.5}) == 0.0);
}

TEST_CASE("uniform box rgb_sigma and the outside convention") {
    AnalyticField field = UniformBox{Aabb({0, 0, 0}, {1, 1, 1}), 4.0, {1, 0, 0}};
    auto [rgb, sigma] = rgb_sigma_at(field, {0.5, 0.1, 0.9}, {0, 0, -1});
    CHECK(rgb.x == 1.0);
    CHECK(rgb.y == 0.0);
    CHECK(sigma == 4.0);

    auto [rgb_out, sigma_out] = rgb_sigma_at(field, {2.0, 0.0, 0.0}, {0, 0, -1});
    CHECK(norm(rgb_out) == 0.0);
    CHECK(sigma_out == 0.0);
}

TEST_CASE("checker alternates colors by lattice parity") {
    AnalyticField field = Checker{0.25, 2.0, {1, 1, 1}, {0, 0, 0}};
    auto [a, sa] = rgb_sigma_at(field, {0.1, 0.1, 0.1}, {});   // parity 0
    auto [b, sb] = rgb_sigma_at(field, {0.3, 0.1, 0.1}, {});   // parity 1
    CHECK(a.x == 1.0);
    CHECK(b.x == 0.0);
    CHECK(sa == 2.0);
    CHECK(sb == 2.0);
    // negative coordinates keep alternating
    auto [c, sc] = rgb_sigma_at(field, {-0.1, 0.1, 0.1}, {});  // parity -1
    CHECK(c.x == 0.0);
    CHECK(sc == 2.0);
}

TEST_CASE("non-finite field positions are rejected") {
    AnalyticField field = SolidSphere{};
    std::vector<Vec3> bad{{std::nan(""), 0, 0}};
    CHECK_THROWS_AS(query_density(field, bad), std::invalid_argument);
}

TEST_CASE("fresh voxel field evaluates softplus(0) everywhere inside") {
    TrilinearVoxelField field(8, Aabb({0, 0, 0}, {1, 1, 1}));
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        Vec3 p{rng.uniform(), rng.uniform(), rng.uniform()};
        CHECK(field.density_at(p) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    CHECK(field.density_at({1.5, 0.5, 0.5}) == 0.0);  // outside the box
}

TEST_CASE("voxel field interpolation identities") {
    TrilinearVoxelField field(5, Aabb({0, 0, 0}, {1, 1, 1}));
    Rng rng(5);
    for (auto& d : field.raw_density()) d = rng.uniform(-2, 2);
    for (auto& c : field.raw_color()) c = rng.uniform(-2, 2);

    SUBCASE("query at a vertex returns that vertex's activated values") {
        for (uint32_t iz = 0; iz < 5; ++iz)
            for (uint32_t iy = 0; iy < 5; ++iy)
                for (uint32_t ix = 0; ix < 5; ++ix) {
                    Vec3 p{ix / 4.0, iy / 4.0, iz / 4.0};
                    size_t v = field.vertex_index(ix, iy, iz);
                    auto [rgb, sigma] = field.rgb_sigma_at(p, {});
                    CHECK(sigma ==
                          doctest::Approx(softplus(field.raw_density()[v])).epsilon(1e-12));
                    CHECK(rgb.x ==
                          doctest::Approx(sigmoid(field.raw_color()[3 * v])).epsilon(1e-12));
                }
    }

    SUBCASE("cell centers average the 8 surrounding vertices") {
        Vec3 p{(0.5 + 1) / 4.0, (0.5 + 2) / 4.0, 0.5 / 4.0};  // center of cell (1,2,0)
        double avg = 0.0;
        for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx)
                    avg += field.raw_density()[field.vertex_index(1 + dx, 2 + dy, 0 + dz)];
        avg /= 8.0;
        CHECK(field.density_at(p) == doctest::Approx(softplus(avg)).epsilon(1e-12));
    }

    SUBCASE("trilinear interpolation reproduces affine raw fields exactly") {
        // weights summing to 1 make any affine function interpolate exactly
        for (uint32_t iz = 0; iz < 5; ++iz)
            for (uint32_t iy = 0; iy < 5; ++iy)
                for (uint32_t ix = 0; ix < 5; ++ix)
                    field.raw_density()[field.vertex_index(ix, iy, iz)] =
                        0.3 * ix / 4.0 - 0.7 * iy / 4.0 + 0.2 * iz / 4.0 + 0.5;
        Rng rng2(7);
        for (int i = 0; i < 40; ++i) {
            Vec3 p{rng2.uniform(), rng2.uniform(), rng2.uniform()};
            double raw = 0.3 * p.x - 0.7 * p.y + 0.2 * p.z + 0.5;
            CHECK(field.density_at(p) == doctest::Approx(softplus(raw)).epsilon(1e-10));
        }
    }
}

TEST_CASE("voxel field backward") {
    Aabb box({0, 0, 0}, {1, 1, 1});

    SUBCASE("zero upstream gives zero gradients") {
        TrilinearVoxelField field(4, box);
        auto grads = field.zero_gradients();
        std::vector<Vec3> pos{{0.3, 0.4, 0.5}};
        std::vector<Vec3> d_rgbs{{0, 0, 0}};
        std::vector<double> d_sigmas{0.0};
        field.backward(pos, d_rgbs, d_sigmas, grads);
        for (double g : grads.d_raw_density) CHECK(g == 0.0);
        for (double g : grads.d_raw_color) CHECK(g == 0.0);
    }

    SUBCASE("a query at a vertex touches only that vertex") {
        TrilinearVoxelField field(4, box);
        Rng rng(11);
        for (auto& d : field.raw_density()) d = rng.uniform(-1, 1);
        auto grads = field.zero_gradients();
        std::vector<Vec3> pos{{1.0 / 3.0, 2.0 / 3.0, 1.0}};  // vertex (1,2,3)
        std::vector<Vec3> d_rgbs{{0, 0, 0}};
        std::vector<double> d_sigmas{1.0};
        field.backward(pos, d_rgbs, d_sigmas, grads);
        size_t v = field.vertex_index(1, 2, 3);
        for (size_t i = 0; i < grads.d_raw_density.size(); ++i) {
            if (i == v)
                CHECK(grads.d_raw_density[i] ==
                      doctest::Approx(sigmoid(field.raw_density()[v])).epsilon(1e-12));
            else
                CHECK(grads.d_raw_density[i] == 0.0);
        }
    }

    SUBCASE("matches central finite differences on random small fields") {
        Rng rng(13);
        const double h = 1e-4;
        for (int trial = 0; trial < 6; ++trial) {
            uint32_t res = 3 + uint32_t(rng.uniform_below(4));  // up to 6 vertices per axis
            TrilinearVoxelField field(res, box);
            for (auto& d : field.raw_density()) d = rng.uniform(-2, 2);
            for (auto& c : field.raw_color()) c = rng.uniform(-2, 2);

            std::vector<Vec3> pos;
            std::vector<Vec3> d_rgbs;
            std::vector<double> d_sigmas;
            for (int i = 0; i < 5; ++i) {
                pos.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
                d_rgbs.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
                d_sigmas.push_back(rng.uniform(-1, 1));
            }
            auto grads = field.zero_gradients();
            field.backward(pos, d_rgbs, d_sigmas, grads);

            auto loss = [&]() {
                double total = 0.0;
                std::vector<Vec3> rgbs;
                std::vector<double> sigmas;
                field.query_rgb_sigma(pos, {}, rgbs, sigmas);
                for (size_t i = 0; i < pos.size(); ++i)
                    total += dot(d_rgbs[i], rgbs[i]) + d_sigmas[i] * sigmas[i];
                return total;
            };
            for (size_t v = 0; v < field.raw_density().size(); ++v) {
                double saved = field.raw_density()[v];
                field.raw_density()[v] = saved + h;
                double up = loss();
                field.raw_density()[v] = saved - h;
                double down = loss();
                field.raw_density()[v] = saved;
                CHECK(close_rel(grads.d_raw_density[v], (up - down) / (2 * h)));
            }
            for (size_t c = 0; c < field.raw_color().size(); c += 7) {  // sparse sweep
                double saved = field.raw_color()[c];
                field.raw_color()[c] = saved + h;
                double up = loss();
                field.raw_color()[c] = saved - h;
                double down = loss();
                field.raw_color()[c] = saved;
                CHECK(close_rel(grads.d_raw_color[c], (up - down) / (2 * h)));
            }
        }
    }
}

TEST_CASE("voxel field checkpoint round trip") {
    TrilinearVoxelField field(6, Aabb({-1, -1, -1}, {1, 1, 1}));
    Rng rng(17);
    for (auto& d : field.raw_density()) d = rng.uniform(-3, 3);
    for (auto& c : field.raw_color()) c = rng.uniform(-3, 3);

    std::stringstream buffer;
    field.save(buffer);
    TrilinearVoxelField loaded = TrilinearVoxelField::load(buffer);
    CHECK(loaded.resolution() == 6);
    CHECK(loaded.box().min.x == -1.0);
    for (size_t i = 0; i < field.raw_density().size(); ++i)
        CHECK(loaded.raw_density()[i] == double(float(field.raw_density()[i])));
    for (size_t i = 0; i < field.raw_color().size(); ++i)
        CHECK(loaded.raw_color()[i] == double(float(field.raw_color()[i])));

    std::stringstream a, b;
    field.save(a);
    loaded.save(b);
    CHECK(a.str() == b.str());
}

TEST_CASE("time-conditioned field translates its base") {
    TimeConditionedField moving{SolidSphere{{0.3, 0.5, 0.5}, 0.1, 20.0, {1, 1, 0}},
                                {0.4, 0.0, 0.0}};
    Rng rng(19);
    for (int i = 0; i < 50; ++i) {
        Vec3 p{rng.uniform(), rng.uniform(), rng.uniform()};
        CHECK(moving.density_at(p, 0.0) == density_at(moving.base, p));
        CHECK(moving.density_at(p, 0.5) == density_at(moving.base, p - Vec3{0.2, 0.0, 0.0}));
    }
    // the ball center at t=1 sits at 0.7
    CHECK(moving.density_at({0.7, 0.5, 0.5}, 1.0) == 20.0);
    CHECK(moving.density_at({0.3, 0.5, 0.5}, 1.0) == 0.0);
}

TEST_CASE("adam optimizer") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        AdamOptimizer opt(3);
        std::vector<double> params{1.0, -2.0, 0.5};
        std::vector<double> grads{0.0, 0.0, 0.0};
        opt.step(params, grads);
        CHECK(params == std::vector<double>{1.0, -2.0, 0.5});
    }

    SUBCASE("first step magnitude is lr in the descent direction") {
        AdamOptimizer opt(2, 1e-2);
        std::vector<double> params{0.0, 0.0};
        std::vector<double> grads{0.37, -4.2};
        opt.step(params, grads);
        // bias-corrected first step: lr * g / (|g| + eps) ~ lr * sign(g)
        CHECK(params[0] == doctest::Approx(-1e-2).epsilon(1e-6));
        CHECK(params[1] == doctest::Approx(1e-2).epsilon(1e-6));
    }

    SUBCASE("constant gradient walks opposite its sign") {
        AdamOptimizer opt(1, 1e-2);
        std::vector<double> params{1.0};
        std::vector<double> grads{2.5};
        for (int i = 0; i < 200; ++i) opt.step(params, grads);
        CHECK(params[0] < -0.5);
    }

    SUBCASE("non-finite gradients are rejected") {
        AdamOptimizer opt(1);
        std::vector<double> params{0.0};
        std::vector<double> grads{std::numeric_limits<double>::infinity()};
        CHECK_THROWS_AS(opt.step(params, grads), std::runtime_error);
    }
}
