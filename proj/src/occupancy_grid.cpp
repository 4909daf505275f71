#include "voxmarch/occupancy_grid.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "voxmarch/rng.hpp"

namespace voxmarch {

namespace {

double domain_diagonal(const Contraction& c) {
    if (c.kind == Contraction::Kind::AabbNormalize) return c.box.diagonal();
    // Unbounded domain: use the box circumscribing the unit sphere, the
    // region where marching steps are uniform.
    return 2.0 * c.radius * std::sqrt(3.0);
}

template <typename T>
void write_raw(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("occupancy grid: truncated stream");
    return value;
}

constexpr char kMagic[4] = {'O', 'G', 'R', 'D'};
constexpr uint32_t kVersion = 1;

}  // namespace

OccupancyGrid::OccupancyGrid(uint32_t resolution, const Contraction& contraction,
                             double alpha_threshold, double reference_step,
                             double initial_density)
    : resolution_(resolution), contraction_(contraction), alpha_threshold_(alpha_threshold) {
    if (resolution == 0) throw std::invalid_argument("occupancy grid: resolution must be > 0");
    if (!(alpha_threshold > 0.0 && alpha_threshold < 1.0))
        throw std::invalid_argument("occupancy grid: alpha_threshold must be in (0,1)");
    if (!(initial_density >= 0.0))
        throw std::invalid_argument("occupancy grid: initial density must be >= 0");
    reference_step_ =
        reference_step > 0.0 ? reference_step : domain_diagonal(contraction) / 1024.0;
    size_t n = size_t(resolution) * resolution * resolution;
    cache_.assign(n, initial_density);
    bits_.assign(n, 0);
    refresh_bits();
}

void OccupancyGrid::refresh_bits() {
    for (size_t c = 0; c < cache_.size(); ++c)
        bits_[c] = (1.0 - std::exp(-cache_[c] * reference_step_)) > alpha_threshold_ ? 1 : 0;
}

double OccupancyGrid::threshold_density() const {
    return -std::log1p(-alpha_threshold_) / reference_step_;
}

bool OccupancyGrid::query(const Vec3& x) const {
    Vec3 g = contract(contraction_, x);  // throws on non-finite input
    if (g.x < 0.0 || g.x > 1.0 || g.y < 0.0 || g.y > 1.0 || g.z < 0.0 || g.z > 1.0) return false;
    uint32_t last = resolution_ - 1;
    auto cell_of = [&](double v) {
        uint32_t i = uint32_t(v * resolution_);
        return i > last ? last : i;  // exactly on the max face -> last cell
    };
    return bits_[cell_index(cell_of(g.x), cell_of(g.y), cell_of(g.z))] != 0;
}

Vec3 OccupancyGrid::probe_grid_point(size_t cell, std::optional<uint64_t> jitter_seed) const {
    uint32_t ix = uint32_t(cell % resolution_);
    uint32_t iy = uint32_t((cell / resolution_) % resolution_);
    uint32_t iz = uint32_t(cell / (size_t(resolution_) * resolution_));
    Vec3 offset{0.5, 0.5, 0.5};
    if (jitter_seed) {
        Rng rng(mix_seed(*jitter_seed, uint64_t(cell)));
        offset = rng.uniform_vec3();
    }
    return Vec3{(ix + offset.x) / resolution_, (iy + offset.y) / resolution_,
                (iz + offset.z) / resolution_};
}

void OccupancyGrid::update(const DensityBatchFn& density_fn, double ema_decay,
                           std::optional<uint64_t> jitter_seed) {
    double t0 = 0.0;
    update_over_time([&](std::span<const Vec3> points, double) { return density_fn(points); },
                     std::span<const double>(&t0, 1), ema_decay, jitter_seed);
}

void OccupancyGrid::update_over_time(const TimeDensityBatchFn& density_fn,
                                     std::span<const double> timestamps, double ema_decay,
                                     std::optional<uint64_t> jitter_seed) {
    if (timestamps.empty())
        throw std::invalid_argument("occupancy grid: timestamps must be non-empty");
    if (!(ema_decay >= 0.0 && ema_decay <= 1.0))
        throw std::invalid_argument("occupancy grid: ema_decay must be in [0,1]");

    // Probe points: invertible cells get a world point, the rest (possible
    // only under SphereContract, beyond the radius-2 ball) probe as empty.
    size_t n = cache_.size();
    std::vector<Vec3> points;
    points.reserve(n);
    std::vector<uint32_t> point_cell;
    point_cell.reserve(n);
    for (size_t c = 0; c < n; ++c) {
        auto world = invert_grid_point(contraction_, probe_grid_point(c, jitter_seed));
        if (world) {
            points.push_back(*world);
            point_cell.push_back(uint32_t(c));
        }
    }

    std::vector<double> probed(n, 0.0);
    for (double t : timestamps) {
        std::vector<double> densities = density_fn(points, t);
        if (densities.size() != points.size())
            throw std::runtime_error("occupancy grid: density_fn returned wrong batch size");
        for (size_t k = 0; k < densities.size(); ++k) {
            double d = densities[k];
            if (!std::isfinite(d) || d < 0.0) {
                size_t c = point_cell[k];
                uint32_t ix = uint32_t(c % resolution_);
                uint32_t iy = uint32_t((c / resolution_) % resolution_);
                uint32_t iz = uint32_t(c / (size_t(resolution_) * resolution_));
                throw std::runtime_error("occupancy grid: invalid density at cell (" +
                                         std::to_string(ix) + "," + std::to_string(iy) + "," +
                                         std::to_string(iz) + ")");
            }
            size_t c = point_cell[k];
            if (d > probed[c]) probed[c] = d;
        }
    }

    for (size_t c = 0; c < n; ++c) cache_[c] = std::max(cache_[c] * ema_decay, probed[c]);
    refresh_bits();
}

double OccupancyGrid::occupied_fraction() const {
    size_t count = 0;
    for (uint8_t b : bits_) count += b;
    return double(count) / double(bits_.size());
}

std::optional<Aabb> OccupancyGrid::cell_world_box(uint32_t ix, uint32_t iy, uint32_t iz) const {
    Vec3 lo{double(ix) / resolution_, double(iy) / resolution_, double(iz) / resolution_};
    Vec3 hi{double(ix + 1) / resolution_, double(iy + 1) / resolution_,
            double(iz + 1) / resolution_};
    auto wlo = invert_grid_point(contraction_, lo);
    auto whi = invert_grid_point(contraction_, hi);
    if (!wlo || !whi) return std::nullopt;
    if (contraction_.kind == Contraction::Kind::AabbNormalize) return Aabb(*wlo, *whi);
    return Aabb(min(*wlo, *whi), max(*wlo, *whi));
}

void OccupancyGrid::seed_occupancy(const std::function<bool(const Aabb&)>& occupied) {
    if (contraction_.kind != Contraction::Kind::AabbNormalize)
        throw std::invalid_argument("seed_occupancy: supported for AabbNormalize grids only");
    double high = 2.0 * threshold_density();
    for (uint32_t iz = 0; iz < resolution_; ++iz)
        for (uint32_t iy = 0; iy < resolution_; ++iy)
            for (uint32_t ix = 0; ix < resolution_; ++ix) {
                size_t c = cell_index(ix, iy, iz);
                bool occ = occupied(*cell_world_box(ix, iy, iz));
                cache_[c] = occ ? high : 0.0;
            }
    refresh_bits();
}

void OccupancyGrid::save(std::ostream& out) const {
    out.write(kMagic, 4);
    write_raw(out, kVersion);
    write_raw(out, resolution_);
    write_raw(out, uint8_t(contraction_.kind));
    if (contraction_.kind == Contraction::Kind::AabbNormalize) {
        for (int i = 0; i < 3; ++i) write_raw(out, contraction_.box.min[i]);
        for (int i = 0; i < 3; ++i) write_raw(out, contraction_.box.max[i]);
    } else {
        for (int i = 0; i < 3; ++i) write_raw(out, contraction_.center[i]);
        write_raw(out, contraction_.radius);
    }
    write_raw(out, alpha_threshold_);
    write_raw(out, reference_step_);
    for (double d : cache_) write_raw(out, float(d));
    // bits packed 8 cells per byte, LSB first, x-fastest cell order
    for (size_t base = 0; base < bits_.size(); base += 8) {
        uint8_t byte = 0;
        for (size_t k = 0; k < 8 && base + k < bits_.size(); ++k)
            if (bits_[base + k]) byte |= uint8_t(1u << k);
        write_raw(out, byte);
    }
    if (!out) throw std::runtime_error("occupancy grid: write failed");
}

OccupancyGrid OccupancyGrid::load(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("occupancy grid: bad magic");
    uint32_t version = read_raw<uint32_t>(in);
    if (version != kVersion) throw std::runtime_error("occupancy grid: unsupported version");
    uint32_t resolution = read_raw<uint32_t>(in);
    uint8_t tag = read_raw<uint8_t>(in);
    Contraction contraction;
    if (tag == uint8_t(Contraction::Kind::AabbNormalize)) {
        Vec3 lo, hi;
        for (int i = 0; i < 3; ++i) lo[i] = read_raw<double>(in);
        for (int i = 0; i < 3; ++i) hi[i] = read_raw<double>(in);
        contraction = Contraction::aabb_normalize(Aabb(lo, hi));
    } else if (tag == uint8_t(Contraction::Kind::SphereContract)) {
        Vec3 center;
        for (int i = 0; i < 3; ++i) center[i] = read_raw<double>(in);
        double radius = read_raw<double>(in);
        contraction = Contraction::sphere(center, radius);
    } else {
        throw std::runtime_error("occupancy grid: unknown contraction tag");
    }
    double alpha_threshold = read_raw<double>(in);
    double reference_step = read_raw<double>(in);

    OccupancyGrid grid(resolution, contraction, alpha_threshold, reference_step);
    for (size_t c = 0; c < grid.cache_.size(); ++c) grid.cache_[c] = read_raw<float>(in);
    for (size_t base = 0; base < grid.bits_.size(); base += 8) {
        uint8_t byte = read_raw<uint8_t>(in);
        for (size_t k = 0; k < 8 && base + k < grid.bits_.size(); ++k)
            grid.bits_[base + k] = (byte >> k) & 1u;
    }
    return grid;
}

void OccupancyGrid::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("occupancy grid: cannot open " + path);
    save(out);
}

OccupancyGrid OccupancyGrid::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("occupancy grid: cannot open " + path);
    return load(in);
}

}  // namespace voxmarch
