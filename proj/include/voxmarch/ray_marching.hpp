#pragma once

#include <functional>
#include <span>

#include "voxmarch/core_types.hpp"
#include "voxmarch/occupancy_grid.hpp"

namespace voxmarch {

struct MarchingConfig {
    double step_size = 1.6914558667664816e-3;  // unit-cube diagonal / 1024
    double early_stop_eps = 1e-4;      // transmittance cutoff, [0,1)
    double alpha_thre = 1e-2;          // per-sample opacity floor, [0,1)
    uint32_t max_samples_per_ray = 2048;
    double unbounded_step_growth = 1.0;  // step multiplier outside the unit ball, >= 1
};

inline double default_step_size(const Aabb& box) { return box.diagonal() / 1024.0; }

// Per-sample density callback: (t_starts, t_ends, ray_indices) -> sigmas.
// May be invoked concurrently on disjoint sample chunks.
using SigmaFn = std::function<std::vector<double>(
    std::span<const double>, std::span<const double>, std::span<const uint32_t>)>;

struct MarchStats {
    size_t samples_emitted = 0;  // intervals that passed the grid test
    size_t samples_kept = 0;     // after alpha filtering and early termination
};

// Fixed-step marching with empty-space skipping and occlusion-based early
// termination. Per ray: intervals whose midpoint falls in an occupied cell
// are emitted, the density callback is evaluated once on the ray's emitted
// chunk (no gradients), samples with alpha <= alpha_thre are dropped, and
// the ray is cut at the first kept sample whose accumulated transmittance
// falls below early_stop_eps (that sample is kept). For SphereContract grids
// the step grows by unbounded_step_growth per step while the midpoint is
// outside the unit ball. Rays are processed independently; concatenation is
// in ray order, so the output does not depend on the thread count.
PackedSamples march(const RayBatch& rays, const OccupancyGrid& grid, const SigmaFn& sigma_fn,
                    const MarchingConfig& config, int n_threads = 1,
                    MarchStats* stats = nullptr);

// Baseline sampler: every interval from near to far at step_size, no grid,
// no filtering.
PackedSamples march_uniform(const RayBatch& rays, const MarchingConfig& config);

// Number of uniform steps covering [near, far) at the given step size.
size_t uniform_step_count(double near, double far, double step_size);

}  // namespace voxmarch
