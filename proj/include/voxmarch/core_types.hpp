#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxmarch/math.hpp"

namespace voxmarch {

// A batch of rays with shared near/far marching planes. Directions must be
// unit length; the batch is immutable once built.
struct RayBatch {
    std::vector<Vec3> origins;
    std::vector<Vec3> directions;
    double near = 0.0;
    double far = 1.0;

    static RayBatch create(std::vector<Vec3> origins, std::vector<Vec3> directions,
                           double near, double far);

    size_t n_rays() const { return origins.size(); }
};

// Ragged per-ray sample intervals stored as flat arrays. packed_info is the
// (offsets, counts) pair; ray_indices repeats each ray id once per sample.
struct PackedSamples {
    std::vector<uint32_t> offsets;      // exclusive prefix sum of counts, length n_rays
    std::vector<uint32_t> counts;       // length n_rays
    std::vector<double> t_starts;       // length n_samples
    std::vector<double> t_ends;         // length n_samples
    std::vector<uint32_t> ray_indices;  // length n_samples

    size_t n_rays() const { return counts.size(); }
    size_t n_samples() const { return t_starts.size(); }
};

struct RenderOutputs {
    std::vector<Vec3> color;
    std::vector<double> opacity;
    std::vector<double> depth;
};

struct PackResult {
    std::vector<uint32_t> offsets;
    std::vector<uint32_t> ray_indices;
};

// Exclusive prefix sum of counts plus the expanded ray index list.
// Rejects batches whose total sample count exceeds the 32-bit index range.
PackResult pack(std::span<const uint32_t> counts);

// Returns the first violated PackedSamples invariant, or nullopt when
// consistent. Violations are reported, never thrown.
std::optional<std::string> validate(const PackedSamples& packed);

}  // namespace voxmarch
