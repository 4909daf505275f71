#include "voxmarch/ray_marching.hpp"

#include <cmath>
#include <stdexcept>

#include "voxmarch/parallel.hpp"

namespace voxmarch {

namespace {

void validate_config(const MarchingConfig& config) {
    if (!(config.step_size > 0.0)) throw std::invalid_argument("marching: step_size must be > 0");
    if (!(config.early_stop_eps >= 0.0 && config.early_stop_eps < 1.0))
        throw std::invalid_argument("marching: early_stop_eps must be in [0,1)");
    if (!(config.alpha_thre >= 0.0 && config.alpha_thre < 1.0))
        throw std::invalid_argument("marching: alpha_thre must be in [0,1)");
    if (config.max_samples_per_ray < 1)
        throw std::invalid_argument("marching: max_samples_per_ray must be >= 1");
    if (!(config.unbounded_step_growth >= 1.0))
        throw std::invalid_argument("marching: unbounded_step_growth must be >= 1");
}

struct RaySamples {
    std::vector<double> t_starts;
    std::vector<double> t_ends;
    size_t emitted = 0;
};

PackedSamples assemble(std::vector<RaySamples>&& per_ray) {
    std::vector<uint32_t> counts(per_ray.size());
    for (size_t r = 0; r < per_ray.size(); ++r)
        counts[r] = uint32_t(per_ray[r].t_starts.size());
    PackResult packing = pack(counts);

    PackedSamples out;
    out.offsets = std::move(packing.offsets);
    out.counts = std::move(counts);
    out.ray_indices = std::move(packing.ray_indices);
    out.t_starts.reserve(out.ray_indices.size());
    out.t_ends.reserve(out.ray_indices.size());
    for (auto& ray : per_ray) {
        out.t_starts.insert(out.t_starts.end(), ray.t_starts.begin(), ray.t_starts.end());
        out.t_ends.insert(out.t_ends.end(), ray.t_ends.begin(), ray.t_ends.end());
    }
    return out;
}

}  // namespace

size_t uniform_step_count(double near, double far, double step_size) {
    if (!(far > near)) return 0;
    double q = (far - near) / step_size;
    return size_t(std::ceil(q * (1.0 - 1e-12)));
}

PackedSamples march(const RayBatch& rays, const OccupancyGrid& grid, const SigmaFn& sigma_fn,
                    const MarchingConfig& config, int n_threads, MarchStats* stats) {
    validate_config(config);
    const bool grows = grid.contraction().kind == Contraction::Kind::SphereContract &&
                       config.unbounded_step_growth > 1.0;
    const Vec3 ball_center = grid.contraction().center;
    const double ball_radius = grid.contraction().radius;

    std::vector<RaySamples> per_ray(rays.n_rays());
    parallel_for(rays.n_rays(), n_threads, [&](size_t begin, size_t end) {
        std::vector<double> cand_ts, cand_te;
        for (size_t r = begin; r < end; ++r) {
            const Vec3& origin = rays.origins[r];
            const Vec3& dir = rays.directions[r];
            cand_ts.clear();
            cand_te.clear();

            // Candidate intervals whose midpoints fall in occupied cells.
            if (!grows) {
                size_t n_steps = uniform_step_count(rays.near, rays.far, config.step_size);
                for (size_t i = 0; i < n_steps; ++i) {
                    if (cand_ts.size() >= config.max_samples_per_ray) break;
                    double t0 = rays.near + double(i) * config.step_size;
                    double t1 = std::min(rays.near + double(i + 1) * config.step_size, rays.far);
                    if (!(t1 > t0)) break;
                    Vec3 mid = origin + dir * (0.5 * (t0 + t1));
                    if (grid.query(mid)) {
                        cand_ts.push_back(t0);
                        cand_te.push_back(t1);
                    }
                }
            } else {
                double t = rays.near;
                double dt = config.step_size;
                while (t < rays.far && cand_ts.size() < config.max_samples_per_ray) {
                    double t1 = std::min(t + dt, rays.far);
                    if (!(t1 > t)) break;
                    Vec3 mid = origin + dir * (0.5 * (t + t1));
                    if (grid.query(mid)) {
                        cand_ts.push_back(t);
                        cand_te.push_back(t1);
                    }
                    t += dt;
                    // uniform step inside the unit ball, multiplicative growth beyond
                    if (norm(mid - ball_center) > ball_radius)
                        dt *= config.unbounded_step_growth;
                    else
                        dt = config.step_size;
                }
            }

            per_ray[r].emitted = cand_ts.size();
            if (cand_ts.empty()) continue;

            std::vector<uint32_t> idx(cand_ts.size(), uint32_t(r));
            std::vector<double> sigmas = sigma_fn(cand_ts, cand_te, idx);
            if (sigmas.size() != cand_ts.size())
                throw std::runtime_error("marching: sigma_fn returned " +
                                         std::to_string(sigmas.size()) + " values for " +
                                         std::to_string(cand_ts.size()) + " samples");

            // Alpha floor first, then early termination over the kept samples;
            // the cut tests transmittance after the current sample, so the
            // first sample that drives it below the threshold is retained.
            double transmittance = 1.0;
            for (size_t s = 0; s < cand_ts.size(); ++s) {
                double sigma = sigmas[s];
                if (!std::isfinite(sigma))
                    throw std::runtime_error("marching: non-finite density at ray " +
                                             std::to_string(r) + " sample " + std::to_string(s));
                if (sigma < 0.0)
                    throw std::runtime_error("marching: negative density at ray " +
                                             std::to_string(r) + " sample " + std::to_string(s));
                double delta = cand_te[s] - cand_ts[s];
                double alpha = 1.0 - std::exp(-sigma * delta);
                if (alpha <= config.alpha_thre) continue;
                per_ray[r].t_starts.push_back(cand_ts[s]);
                per_ray[r].t_ends.push_back(cand_te[s]);
                transmittance *= 1.0 - alpha;
                if (transmittance < config.early_stop_eps) break;
            }
        }
    });

    if (stats) {
        stats->samples_emitted = 0;
        stats->samples_kept = 0;
        for (const auto& ray : per_ray) {
            stats->samples_emitted += ray.emitted;
            stats->samples_kept += ray.t_starts.size();
        }
    }
    return assemble(std::move(per_ray));
}

PackedSamples march_uniform(const RayBatch& rays, const MarchingConfig& config) {
    validate_config(config);
    size_t n_steps = uniform_step_count(rays.near, rays.far, config.step_size);
    std::vector<RaySamples> per_ray(rays.n_rays());
    for (size_t r = 0; r < rays.n_rays(); ++r) {
        per_ray[r].t_starts.reserve(n_steps);
        per_ray[r].t_ends.reserve(n_steps);
        for (size_t i = 0; i < n_steps; ++i) {
            double t0 = rays.near + double(i) * config.step_size;
            double t1 = std::min(rays.near + double(i + 1) * config.step_size, rays.far);
            if (!(t1 > t0)) break;
            per_ray[r].t_starts.push_back(t0);
            per_ray[r].t_ends.push_back(t1);
        }
    }
    return assemble(std::move(per_ray));
}

}  // namespace voxmarch
