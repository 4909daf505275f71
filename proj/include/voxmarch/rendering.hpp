#pragma once

#include <span>

#include "voxmarch/core_types.hpp"

namespace voxmarch {

// Per-sample radiance field outputs paired with a PackedSamples instance.
struct SampleAttributes {
    std::vector<Vec3> rgbs;      // components in [0,1]
    std::vector<double> sigmas;  // non-negative, finite
};

struct RenderGradients {
    std::vector<Vec3> d_rgbs;
    std::vector<double> d_sigmas;
};

// Per-sample transmittance: exclusive per-ray scan, T = 1 at each ray's
// first sample.
std::vector<double> transmittance(const PackedSamples& packed, std::span<const double> sigmas);

// Accumulates samples into per-ray color, opacity and depth:
//   color   = sum_i T_i * alpha_i * c_i,  alpha_i = 1 - exp(-sigma_i * delta_i)
//   opacity = sum_i T_i * alpha_i
//   depth   = sum_i T_i * alpha_i * (t_start_i + t_end_i) / 2   (unnormalized)
// Rays with no samples output zeros.
RenderOutputs render_forward(const PackedSamples& packed, const SampleAttributes& attrs,
                             int n_threads = 1);

// Exact gradients of render_forward contracted with upstream per-ray
// gradients. Closed form, one reverse suffix-sum pass per ray:
//   dL/dc_i     = T_i * alpha_i * d_color
//   dL/dsigma_i = delta_i * (T_{i+1} * v_i - sum_{j>i} T_j alpha_j v_j)
// where v_i contracts the sample's color, opacity and depth contributions
// with the upstream gradients.
RenderGradients render_backward(const PackedSamples& packed, const SampleAttributes& attrs,
                                std::span<const Vec3> d_color, std::span<const double> d_opacity,
                                std::span<const double> d_depth, int n_threads = 1);

// Accumulates arbitrary per-sample values (dim components each) with the
// same T * alpha weights; opacity and depth are the dim=1 special cases.
std::vector<double> render_attribute(const PackedSamples& packed, std::span<const double> sigmas,
                                     std::span<const double> values, size_t dim);

}  // namespace voxmarch
