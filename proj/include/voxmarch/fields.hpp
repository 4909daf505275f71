#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "voxmarch/math.hpp"

namespace voxmarch {

// Analytic radiance fields with closed-form density, used as render targets
// and test oracles. All bundled fields are view-independent.
struct UniformBox {
    Aabb box;
    double sigma = 1.0;
    Vec3 rgb{1.0, 1.0, 1.0};
};

struct SolidSphere {
    Vec3 center{0.5, 0.5, 0.5};
    double radius = 0.2;
    double sigma = 1.0;
    Vec3 rgb{1.0, 1.0, 1.0};
};

struct Checker {
    double period = 0.125;
    double sigma = 1.0;
    Vec3 rgb_a{1.0, 1.0, 1.0};
    Vec3 rgb_b{0.0, 0.0, 0.0};
};

using AnalyticField = std::variant<UniformBox, SolidSphere, Checker>;

double density_at(const AnalyticField& field, const Vec3& p);
std::pair<Vec3, double> rgb_sigma_at(const AnalyticField& field, const Vec3& p, const Vec3& dir);

std::vector<double> query_density(const AnalyticField& field, std::span<const Vec3> positions);
void query_rgb_sigma(const AnalyticField& field, std::span<const Vec3> positions,
                     std::span<const Vec3> directions, std::vector<Vec3>& rgbs,
                     std::vector<double>& sigmas);

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

/// Dense trainable voxel field over a box: one raw density and one raw rgb
/// triple per lattice vertex, trilinearly interpolated then activated
/// (softplus for density, sigmoid per color channel). Queries outside the
/// box return zero density. resolution counts vertices per axis.
class TrilinearVoxelField {
public:
    TrilinearVoxelField(uint32_t resolution, const Aabb& box);

    double density_at(const Vec3& p) const;
    std::pair<Vec3, double> rgb_sigma_at(const Vec3& p, const Vec3& dir) const;
    std::vector<double> query_density(std::span<const Vec3> positions) const;
    void query_rgb_sigma(std::span<const Vec3> positions, std::span<const Vec3> directions,
                         std::vector<Vec3>& rgbs, std::vector<double>& sigmas) const;

    struct ParamGradients {
        std::vector<double> d_raw_density;  // resolution^3
        std::vector<double> d_raw_color;    // 3 * resolution^3
    };
    ParamGradients zero_gradients() const;

    // Chain rule through activations and interpolation weights: accumulates
    // the exact parameter gradient of the query chain at the given positions
    // into `accum`. Accumulation order is sample order, so results are
    // bitwise reproducible.
    void backward(std::span<const Vec3> positions, std::span<const Vec3> d_rgbs,
                  std::span<const double> d_sigmas, ParamGradients& accum) const;

    std::vector<double>& raw_density() { return raw_density_; }
    const std::vector<double>& raw_density() const { return raw_density_; }
    std::vector<double>& raw_color() { return raw_color_; }  // rgb per vertex, x-fastest
    const std::vector<double>& raw_color() const { return raw_color_; }

    uint32_t resolution() const { return resolution_; }
    const Aabb& box() const { return box_; }
    size_t n_vertices() const { return raw_density_.size(); }
    size_t vertex_index(uint32_t ix, uint32_t iy, uint32_t iz) const {
        return size_t(ix) + size_t(resolution_) * (size_t(iy) + size_t(resolution_) * iz);
    }

    void save(std::ostream& out) const;
    void save_file(const std::string& path) const;
    static TrilinearVoxelField load(std::istream& in);
    static TrilinearVoxelField load_file(const std::string& path);

private:
    struct Stencil {
        size_t vertex[8];
        double weight[8];
        bool inside = false;
    };
    Stencil stencil_at(const Vec3& p) const;

    uint32_t resolution_ = 0;
    Aabb box_;
    std::vector<double> raw_density_;
    std::vector<double> raw_color_;
};

// A base field rigidly translated over time: queries at time t evaluate the
// base at x - velocity * t. At t = 0 this is the base field exactly.
struct TimeConditionedField {
    AnalyticField base;
    Vec3 velocity{0.0, 0.0, 0.0};

    double density_at(const Vec3& p, double t) const;
    std::pair<Vec3, double> rgb_sigma_at(const Vec3& p, const Vec3& dir, double t) const;
};

// Adam with bias correction. One state per parameter vector.
class AdamOptimizer {
public:
    explicit AdamOptimizer(size_t n_params, double lr = 1e-2, double beta1 = 0.9,
                           double beta2 = 0.999, double eps = 1e-8);

    void step(std::span<double> params, std::span<const double> grads);

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    double lr_, beta1_, beta2_, eps_;
    uint64_t t_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace voxmarch
