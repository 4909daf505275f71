#include "voxmarch/rendering.hpp"

#include <cmath>
#include <stdexcept>

#include "voxmarch/parallel.hpp"

namespace voxmarch {

namespace {

void check_lengths(const PackedSamples& packed, size_t rgbs, size_t sigmas) {
    if (rgbs != packed.n_samples() || sigmas != packed.n_samples())
        throw std::invalid_argument("rendering: attribute length mismatch");
}

}  // namespace

std::vector<double> transmittance(const PackedSamples& packed, std::span<const double> sigmas) {
    if (sigmas.size() != packed.n_samples())
        throw std::invalid_argument("rendering: sigma length mismatch");
    std::vector<double> out(packed.n_samples());
    for (size_t r = 0; r < packed.n_rays(); ++r) {
        size_t begin = packed.offsets[r];
        size_t end = begin + packed.counts[r];
        double t = 1.0;
        for (size_t s = begin; s < end; ++s) {
            out[s] = t;
            t *= std::exp(-sigmas[s] * (packed.t_ends[s] - packed.t_starts[s]));
        }
    }
    return out;
}

RenderOutputs render_forward(const PackedSamples& packed, const SampleAttributes& attrs,
                             int n_threads) {
    check_lengths(packed, attrs.rgbs.size(), attrs.sigmas.size());
    RenderOutputs out;
    out.color.assign(packed.n_rays(), Vec3{});
    out.opacity.assign(packed.n_rays(), 0.0);
    out.depth.assign(packed.n_rays(), 0.0);

    parallel_for(packed.n_rays(), n_threads, [&](size_t begin_ray, size_t end_ray) {
        for (size_t r = begin_ray; r < end_ray; ++r) {
            size_t begin = packed.offsets[r];
            size_t end = begin + packed.counts[r];
            double trans = 1.0;
            Vec3 color{};
            double opacity = 0.0, depth = 0.0;
            for (size_t s = begin; s < end; ++s) {
                double delta = packed.t_ends[s] - packed.t_starts[s];
                double alpha = 1.0 - std::exp(-attrs.sigmas[s] * delta);
                double weight = trans * alpha;
                color += attrs.rgbs[s] * weight;
                opacity += weight;
                depth += weight * 0.5 * (packed.t_starts[s] + packed.t_ends[s]);
                trans *= 1.0 - alpha;
            }
            out.color[r] = color;
            out.opacity[r] = opacity;
            out.depth[r] = depth;
        }
    });
    return out;
}

RenderGradients render_backward(const PackedSamples& packed, const SampleAttributes& attrs,
                                std::span<const Vec3> d_color, std::span<const double> d_opacity,
                                std::span<const double> d_depth, int n_threads) {
    check_lengths(packed, attrs.rgbs.size(), attrs.sigmas.size());
    if (d_color.size() != packed.n_rays() || d_opacity.size() != packed.n_rays() ||
        d_depth.size() != packed.n_rays())
        throw std::invalid_argument("rendering: upstream gradient length mismatch");

    RenderGradients grads;
    grads.d_rgbs.assign(packed.n_samples(), Vec3{});
    grads.d_sigmas.assign(packed.n_samples(), 0.0);

    parallel_for(packed.n_rays(), n_threads, [&](size_t begin_ray, size_t end_ray) {
        std::vector<double> trans;   // T_i per sample (exclusive)
        std::vector<double> alpha;
        for (size_t r = begin_ray; r < end_ray; ++r) {
            size_t begin = packed.offsets[r];
            size_t count = packed.counts[r];
            if (count == 0) continue;
            trans.assign(count, 0.0);
            alpha.assign(count, 0.0);
            double t = 1.0;
            for (size_t k = 0; k < count; ++k) {
                size_t s = begin + k;
                double delta = packed.t_ends[s] - packed.t_starts[s];
                double a = 1.0 - std::exp(-attrs.sigmas[s] * delta);
                trans[k] = t;
                alpha[k] = a;
                t *= 1.0 - a;
            }
            // Reverse pass with a running suffix of downstream contributions.
            double suffix = 0.0;
            for (size_t k = count; k-- > 0;) {
                size_t s = begin + k;
                double delta = packed.t_ends[s] - packed.t_starts[s];
                double mid = 0.5 * (packed.t_starts[s] + packed.t_ends[s]);
                double value = dot(d_color[r], attrs.rgbs[s]) + d_opacity[r] + d_depth[r] * mid;
                double weight = trans[k] * alpha[k];
                grads.d_rgbs[s] = d_color[r] * weight;
                grads.d_sigmas[s] = delta * (trans[k] * (1.0 - alpha[k]) * value - suffix);
                suffix += weight * value;
            }
        }
    });
    return grads;
}

std::vector<double> render_attribute(const PackedSamples& packed, std::span<const double> sigmas,
                                     std::span<const double> values, size_t dim) {
    if (sigmas.size() != packed.n_samples())
        throw std::invalid_argument("rendering: sigma length mismatch");
    if (dim == 0 || values.size() != packed.n_samples() * dim)
        throw std::invalid_argument("rendering: value length mismatch");
    std::vector<double> out(packed.n_rays() * dim, 0.0);
    for (size_t r = 0; r < packed.n_rays(); ++r) {
        size_t begin = packed.offsets[r];
        size_t end = begin + packed.counts[r];
        double trans = 1.0;
        for (size_t s = begin; s < end; ++s) {
            double delta = packed.t_ends[s] - packed.t_starts[s];
            double alpha = 1.0 - std::exp(-sigmas[s] * delta);
            double weight = trans * alpha;
            for (size_t d = 0; d < dim; ++d) out[r * dim + d] += weight * values[s * dim + d];
            trans *= 1.0 - alpha;
        }
    }
    return out;
}

}  // namespace voxmarch
