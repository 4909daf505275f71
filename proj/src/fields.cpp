#include "voxmarch/fields.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace voxmarch {

namespace {

void check_finite_positions(std::span<const Vec3> positions) {
    for (size_t i = 0; i < positions.size(); ++i)
        if (!is_finite(positions[i]))
            throw std::invalid_argument("field: non-finite position at index " +
                                        std::to_string(i));
}

template <typename T>
void write_raw(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("voxel field: truncated stream");
    return value;
}

constexpr char kMagic[4] = {'V', 'X', 'F', 'D'};
constexpr uint32_t kVersion = 1;

}  // namespace

double density_at(const AnalyticField& field, const Vec3& p) {
    return std::visit(
        [&](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, UniformBox>) {
                return f.box.contains(p) ? f.sigma : 0.0;
            } else if constexpr (std::is_same_v<T, SolidSphere>) {
                return norm(p - f.center) <= f.radius ? f.sigma : 0.0;
            } else {
                return f.sigma;
            }
        },
        field);
}

std::pair<Vec3, double> rgb_sigma_at(const AnalyticField& field, const Vec3& p,
                                     const Vec3& /*dir*/) {
    return std::visit(
        [&](const auto& f) -> std::pair<Vec3, double> {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, UniformBox>) {
                if (!f.box.contains(p)) return {Vec3{}, 0.0};
                return {f.rgb, f.sigma};
            } else if constexpr (std::is_same_v<T, SolidSphere>) {
                if (norm(p - f.center) > f.radius) return {Vec3{}, 0.0};
                return {f.rgb, f.sigma};
            } else {
                long long parity = (long long)std::floor(p.x / f.period) +
                                   (long long)std::floor(p.y / f.period) +
                                   (long long)std::floor(p.z / f.period);
                return {(parity % 2 + 2) % 2 == 0 ? f.rgb_a : f.rgb_b, f.sigma};
            }
        },
        field);
}

std::vector<double> query_density(const AnalyticField& field, std::span<const Vec3> positions) {
    check_finite_positions(positions);
    std::vector<double> out(positions.size());
    for (size_t i = 0; i < positions.size(); ++i) out[i] = density_at(field, positions[i]);
    return out;
}

void query_rgb_sigma(const AnalyticField& field, std::span<const Vec3> positions,
                     std::span<const Vec3> directions, std::vector<Vec3>& rgbs,
                     std::vector<double>& sigmas) {
    check_finite_positions(positions);
    rgbs.resize(positions.size());
    sigmas.resize(positions.size());
    for (size_t i = 0; i < positions.size(); ++i) {
        auto [rgb, sigma] = rgb_sigma_at(field, positions[i],
                                         directions.empty() ? Vec3{} : directions[i]);
        rgbs[i] = rgb;
        sigmas[i] = sigma;
    }
}

TrilinearVoxelField::TrilinearVoxelField(uint32_t resolution, const Aabb& box)
    : resolution_(resolution), box_(box) {
    if (resolution < 2)
        throw std::invalid_argument("voxel field: resolution must be >= 2 vertices per axis");
    size_t n = size_t(resolution) * resolution * resolution;
    raw_density_.assign(n, 0.0);
    raw_color_.assign(3 * n, 0.0);
}

TrilinearVoxelField::Stencil TrilinearVoxelField::stencil_at(const Vec3& p) const {
    Stencil st;
    if (!box_.contains(p)) return st;
    st.inside = true;
    Vec3 rel = (p - box_.min) / box_.size() * double(resolution_ - 1);
    uint32_t last_cell = resolution_ - 2;
    auto cell_of = [&](double v) {
        double f = std::floor(v);
        if (f < 0.0) return uint32_t(0);
        uint32_t c = uint32_t(f);
        return c > last_cell ? last_cell : c;
    };
    uint32_t cx = cell_of(rel.x), cy = cell_of(rel.y), cz = cell_of(rel.z);
    double fx = rel.x - cx, fy = rel.y - cy, fz = rel.z - cz;
    double wx[2] = {1.0 - fx, fx};
    double wy[2] = {1.0 - fy, fy};
    double wz[2] = {1.0 - fz, fz};
    int k = 0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx, ++k) {
                st.vertex[k] = vertex_index(cx + dx, cy + dy, cz + dz);
                st.weight[k] = wx[dx] * wy[dy] * wz[dz];
            }
    return st;
}

double TrilinearVoxelField::density_at(const Vec3& p) const {
    Stencil st = stencil_at(p);
    if (!st.inside) return 0.0;
    double raw = 0.0;
    for (int k = 0; k < 8; ++k) raw += st.weight[k] * raw_density_[st.vertex[k]];
    return softplus(raw);
}

std::pair<Vec3, double> TrilinearVoxelField::rgb_sigma_at(const Vec3& p,
                                                          const Vec3& /*dir*/) const {
    Stencil st = stencil_at(p);
    if (!st.inside) return {Vec3{}, 0.0};
    double raw_d = 0.0;
    Vec3 raw_c{};
    for (int k = 0; k < 8; ++k) {
        double w = st.weight[k];
        size_t v = st.vertex[k];
        raw_d += w * raw_density_[v];
        raw_c.x += w * raw_color_[3 * v];
        raw_c.y += w * raw_color_[3 * v + 1];
        raw_c.z += w * raw_color_[3 * v + 2];
    }
    return {{sigmoid(raw_c.x), sigmoid(raw_c.y), sigmoid(raw_c.z)}, softplus(raw_d)};
}

std::vector<double> TrilinearVoxelField::query_density(std::span<const Vec3> positions) const {
    check_finite_positions(positions);
    std::vector<double> out(positions.size());
    for (size_t i = 0; i < positions.size(); ++i) out[i] = density_at(positions[i]);
    return out;
}

void TrilinearVoxelField::query_rgb_sigma(std::span<const Vec3> positions,
                                          std::span<const Vec3> directions,
                                          std::vector<Vec3>& rgbs,
                                          std::vector<double>& sigmas) const {
    check_finite_positions(positions);
    rgbs.resize(positions.size());
    sigmas.resize(positions.size());
    for (size_t i = 0; i < positions.size(); ++i) {
        auto [rgb, sigma] =
            rgb_sigma_at(positions[i], directions.empty() ? Vec3{} : directions[i]);
        rgbs[i] = rgb;
        sigmas[i] = sigma;
    }
}

TrilinearVoxelField::ParamGradients TrilinearVoxelField::zero_gradients() const {
    ParamGradients g;
    g.d_raw_density.assign(raw_density_.size(), 0.0);
    g.d_raw_color.assign(raw_color_.size(), 0.0);
    return g;
}

void TrilinearVoxelField::backward(std::span<const Vec3> positions, std::span<const Vec3> d_rgbs,
                                   std::span<const double> d_sigmas,
                                   ParamGradients& accum) const {
    if (d_rgbs.size() != positions.size() || d_sigmas.size() != positions.size())
        throw std::invalid_argument("voxel field: gradient length mismatch");
    if (accum.d_raw_density.size() != raw_density_.size() ||
        accum.d_raw_color.size() != raw_color_.size())
        throw std::invalid_argument("voxel field: gradient buffer size mismatch");

    for (size_t i = 0; i < positions.size(); ++i) {
        Stencil st = stencil_at(positions[i]);
        if (!st.inside) continue;
        double raw_d = 0.0;
        Vec3 raw_c{};
        for (int k = 0; k < 8; ++k) {
            double w = st.weight[k];
            size_t v = st.vertex[k];
            raw_d += w * raw_density_[v];
            raw_c.x += w * raw_color_[3 * v];
            raw_c.y += w * raw_color_[3 * v + 1];
            raw_c.z += w * raw_color_[3 * v + 2];
        }
        // softplus' = sigmoid; sigmoid' = s(1-s), both at the interpolated raw value
        double d_raw_density = d_sigmas[i] * sigmoid(raw_d);
        Vec3 s{sigmoid(raw_c.x), sigmoid(raw_c.y), sigmoid(raw_c.z)};
        Vec3 d_raw_color{d_rgbs[i].x * s.x * (1.0 - s.x), d_rgbs[i].y * s.y * (1.0 - s.y),
                         d_rgbs[i].z * s.z * (1.0 - s.z)};
        for (int k = 0; k < 8; ++k) {
            double w = st.weight[k];
            size_t v = st.vertex[k];
            accum.d_raw_density[v] += w * d_raw_density;
            accum.d_raw_color[3 * v] += w * d_raw_color.x;
            accum.d_raw_color[3 * v + 1] += w * d_raw_color.y;
            accum.d_raw_color[3 * v + 2] += w * d_raw_color.z;
        }
    }
}

void TrilinearVoxelField::save(std::ostream& out) const {
    out.write(kMagic, 4);
    write_raw(out, kVersion);
    write_raw(out, resolution_);
    for (int i = 0; i < 3; ++i) write_raw(out, box_.min[i]);
    for (int i = 0; i < 3; ++i) write_raw(out, box_.max[i]);
    for (double d : raw_density_) write_raw(out, float(d));
    for (double d : raw_color_) write_raw(out, float(d));
    if (!out) throw std::runtime_error("voxel field: write failed");
}

TrilinearVoxelField TrilinearVoxelField::load(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("voxel field: bad magic");
    uint32_t version = read_raw<uint32_t>(in);
    if (version != kVersion) throw std::runtime_error("voxel field: unsupported version");
    uint32_t resolution = read_raw<uint32_t>(in);
    Vec3 lo, hi;
    for (int i = 0; i < 3; ++i) lo[i] = read_raw<double>(in);
    for (int i = 0; i < 3; ++i) hi[i] = read_raw<double>(in);
    TrilinearVoxelField field(resolution, Aabb(lo, hi));
    for (double& d : field.raw_density_) d = read_raw<float>(in);
    for (double& d : field.raw_color_) d = read_raw<float>(in);
    return field;
}

void TrilinearVoxelField::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("voxel field: cannot open " + path);
    save(out);
}

TrilinearVoxelField TrilinearVoxelField::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("voxel field: cannot open " + path);
    return load(in);
}

double TimeConditionedField::density_at(const Vec3& p, double t) const {
    return voxmarch::density_at(base, p - velocity * t);
}

std::pair<Vec3, double> TimeConditionedField::rgb_sigma_at(const Vec3& p, const Vec3& dir,
                                                           double t) const {
    return voxmarch::rgb_sigma_at(base, p - velocity * t, dir);
}

AdamOptimizer::AdamOptimizer(size_t n_params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n_params, 0.0), v_(n_params, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw std::invalid_argument("adam: parameter/gradient size mismatch");
    for (size_t i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads[i]))
            throw std::runtime_error("adam: non-finite gradient at index " + std::to_string(i));
    ++t_;
    double bias1 = 1.0 - std::pow(beta1_, double(t_));
    double bias2 = 1.0 - std::pow(beta2_, double(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
        double m_hat = m_[i] / bias1;
        double v_hat = v_[i] / bias2;
        params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
}

}  // namespace voxmarch
