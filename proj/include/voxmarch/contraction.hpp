#pragma once

#include <cstdint>
#include <optional>

#include "voxmarch/math.hpp"

namespace voxmarch {

// Mapping from world space into the grid's unit domain [0,1]^3. AabbNormalize
// is a plain affine rescale of a bounded box; SphereContract squashes all of
// space into a ball of radius 2 (identity inside the unit ball, radially
// compressed outside), which is then affinely mapped onto the unit cube.
struct Contraction {
    enum class Kind : uint8_t { AabbNormalize = 0, SphereContract = 1 };

    Kind kind = Kind::AabbNormalize;
    Aabb box;                      // AabbNormalize
    Vec3 center{0.0, 0.0, 0.0};    // SphereContract
    double radius = 1.0;           // SphereContract, > 0

    static Contraction aabb_normalize(const Aabb& box) {
        Contraction c;
        c.kind = Kind::AabbNormalize;
        c.box = box;
        return c;
    }
    static Contraction sphere(const Vec3& center, double radius);
};

// The nonlinear part on normalized coordinates u = (x - center)/radius:
// identity for |u| <= 1, (2 - 1/|u|) * u/|u| outside. Range is the open ball
// of radius 2.
Vec3 contract_to_ball(const Vec3& u);

// World point to grid domain. For SphereContract the result always lies in
// [0,1]^3; for AabbNormalize points outside the box map outside the cube, and
// callers treat them as unoccupied. Non-finite input is an error.
Vec3 contract(const Contraction& c, const Vec3& x);

bool is_inside_domain(const Contraction& c, const Vec3& x);

// Preimage of a grid-domain point. For SphereContract, points at contracted
// radius >= 2 have no finite preimage and yield nullopt.
std::optional<Vec3> invert_grid_point(const Contraction& c, const Vec3& g);

}  // namespace voxmarch
