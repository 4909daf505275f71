#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxmarch/contraction.hpp"
#include "voxmarch/math.hpp"

namespace voxmarch {

using DensityBatchFn = std::function<std::vector<double>(std::span<const Vec3>)>;
using TimeDensityBatchFn = std::function<std::vector<double>(std::span<const Vec3>, double)>;

/// Binary occupancy cache over a cubic lattice in the contraction's unit
/// domain. A per-cell density EMA is maintained by update(); the occupancy
/// bit of a cell is (1 - exp(-density * reference_step)) > alpha_threshold.
/// query() is safe for unrestricted parallel use; update() requires
/// exclusive access.
class OccupancyGrid {
public:
    // reference_step <= 0 selects the default, domain diagonal / 1024.
    // initial_density seeds the density cache uniformly, so a grid can start
    // fully occupied (density above threshold) or fully empty (zero).
    OccupancyGrid(uint32_t resolution, const Contraction& contraction,
                  double alpha_threshold = 1e-2, double reference_step = 0.0,
                  double initial_density = 0.0);

    // True iff x falls in an occupied cell. Points outside the grid domain
    // are empty by definition. Points exactly on the domain's max face are
    // clamped into the last cell.
    bool query(const Vec3& x) const;

    // One probe per cell: jittered uniformly within the cell when jitter_seed
    // is given, at the cell center otherwise. density_cache <- max(cache *
    // ema_decay, probed density); bits recomputed from the threshold test.
    // Density callbacks must not track gradients.
    void update(const DensityBatchFn& density_fn, double ema_decay,
                std::optional<uint64_t> jitter_seed = std::nullopt);

    // As update(), but each cell's probed density is the maximum of the
    // time-conditioned field over all given timestamps.
    void update_over_time(const TimeDensityBatchFn& density_fn,
                          std::span<const double> timestamps, double ema_decay,
                          std::optional<uint64_t> jitter_seed = std::nullopt);

    double occupied_fraction() const;

    // Density at which 1 - exp(-sigma * reference_step) == alpha_threshold.
    double threshold_density() const;

    // Overwrites cells from a predicate over their world-space boxes, for
    // grids built analytically rather than from a density field. The density
    // cache is set consistently with the bits. AabbNormalize grids only.
    void seed_occupancy(const std::function<bool(const Aabb&)>& occupied);

    void save(std::ostream& out) const;
    void save_file(const std::string& path) const;
    static OccupancyGrid load(std::istream& in);
    static OccupancyGrid load_file(const std::string& path);

    uint32_t resolution() const { return resolution_; }
    const Contraction& contraction() const { return contraction_; }
    double alpha_threshold() const { return alpha_threshold_; }
    double reference_step() const { return reference_step_; }
    size_t n_cells() const { return bits_.size(); }
    bool bit(size_t cell) const { return bits_[cell]; }
    double density_cache(size_t cell) const { return cache_[cell]; }
    size_t cell_index(uint32_t ix, uint32_t iy, uint32_t iz) const {
        return size_t(ix) + size_t(resolution_) * (size_t(iy) + size_t(resolution_) * iz);
    }
    // World-space box of a cell; nullopt for cells with no finite preimage.
    std::optional<Aabb> cell_world_box(uint32_t ix, uint32_t iy, uint32_t iz) const;

private:
    void refresh_bits();
    Vec3 probe_grid_point(size_t cell, std::optional<uint64_t> jitter_seed) const;

    uint32_t resolution_ = 0;
    Contraction contraction_;
    double alpha_threshold_ = 1e-2;
    double reference_step_ = 0.0;
    std::vector<double> cache_;
    std::vector<uint8_t> bits_;  // one byte per cell in memory; packed on disk
};

}  // namespace voxmarch
