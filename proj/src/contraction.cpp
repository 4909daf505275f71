#include "voxmarch/contraction.hpp"

#include <cmath>
#include <stdexcept>

namespace voxmarch {

Contraction Contraction::sphere(const Vec3& center, double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius) || !is_finite(center))
        throw std::invalid_argument("sphere contraction: requires finite center and radius > 0");
    Contraction c;
    c.kind = Kind::SphereContract;
    c.center = center;
    c.radius = radius;
    return c;
}

Vec3 contract_to_ball(const Vec3& u) {
    double r = norm(u);
    if (r <= 1.0) return u;
    return u * ((2.0 - 1.0 / r) / r);
}

Vec3 contract(const Contraction& c, const Vec3& x) {
    if (!is_finite(x)) throw std::invalid_argument("non-finite coordinate");
    if (c.kind == Contraction::Kind::AabbNormalize)
        return (x - c.box.min) / c.box.size();
    Vec3 ball = contract_to_ball((x - c.center) / c.radius);
    return (ball + Vec3{2.0, 2.0, 2.0}) / 4.0;
}

bool is_inside_domain(const Contraction& c, const Vec3& x) {
    Vec3 g = contract(c, x);
    return g.x >= 0.0 && g.x <= 1.0 && g.y >= 0.0 && g.y <= 1.0 && g.z >= 0.0 && g.z <= 1.0;
}

std::optional<Vec3> invert_grid_point(const Contraction& c, const Vec3& g) {
    if (c.kind == Contraction::Kind::AabbNormalize)
        return c.box.min + g * c.box.size();
    Vec3 ball = g * 4.0 - Vec3{2.0, 2.0, 2.0};
    double r = norm(ball);
    if (r <= 1.0) return c.center + ball * c.radius;
    if (r >= 2.0) return std::nullopt;
    // invert r' = 2 - 1/r: world radius is 1/(2 - r') along the same direction
    double world_r = 1.0 / (2.0 - r);
    return c.center + ball * (world_r / r * c.radius);
}

}  // namespace voxmarch
