#include "voxmarch/core_types.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace voxmarch {

RayBatch RayBatch::create(std::vector<Vec3> origins, std::vector<Vec3> directions,
                          double near, double far) {
    if (origins.size() != directions.size())
        throw std::invalid_argument("ray batch: origins/directions size mismatch");
    if (!(near >= 0.0) || !(far > near))
        throw std::invalid_argument("ray batch: requires far > near >= 0");
    for (size_t i = 0; i < directions.size(); ++i) {
        if (!is_finite(origins[i]) || !is_finite(directions[i]))
            throw std::invalid_argument("ray batch: non-finite ray at index " + std::to_string(i));
        if (std::abs(norm(directions[i]) - 1.0) > 1e-6)
            throw std::invalid_argument("ray batch: non-unit direction at index " +
                                        std::to_string(i));
    }
    RayBatch batch;
    batch.origins = std::move(origins);
    batch.directions = std::move(directions);
    batch.near = near;
    batch.far = far;
    return batch;
}

PackResult pack(std::span<const uint32_t> counts) {
    uint64_t total = 0;
    for (uint32_t c : counts) total += c;
    if (total > std::numeric_limits<uint32_t>::max())
        throw std::invalid_argument("pack: sample count exceeds 32-bit index range");
    if (counts.size() > std::numeric_limits<uint32_t>::max())
        throw std::invalid_argument("pack: ray count exceeds 32-bit index range");

    PackResult result;
    result.offsets.resize(counts.size());
    result.ray_indices.reserve(size_t(total));
    uint32_t running = 0;
    for (size_t r = 0; r < counts.size(); ++r) {
        result.offsets[r] = running;
        running += counts[r];
        for (uint32_t k = 0; k < counts[r]; ++k) result.ray_indices.push_back(uint32_t(r));
    }
    return result;
}

std::optional<std::string> validate(const PackedSamples& packed) {
    if (packed.offsets.size() != packed.counts.size()) return "length mismatch";
    uint64_t total = 0;
    for (uint32_t c : packed.counts) total += c;
    if (total != packed.t_starts.size() || total != packed.t_ends.size() ||
        total != packed.ray_indices.size())
        return "length mismatch";

    uint64_t running = 0;
    for (size_t r = 0; r < packed.counts.size(); ++r) {
        if (packed.offsets[r] != running) return "offset mismatch";
        running += packed.counts[r];
    }

    for (size_t s = 0; s < packed.t_starts.size(); ++s)
        if (!(packed.t_ends[s] > packed.t_starts[s])) return "non-positive interval";

    for (size_t r = 0; r < packed.counts.size(); ++r) {
        size_t begin = packed.offsets[r];
        size_t end = begin + packed.counts[r];
        for (size_t s = begin + 1; s < end; ++s) {
            if (!(packed.t_starts[s] > packed.t_starts[s - 1])) return "non-monotone t_starts";
            if (packed.t_starts[s] < packed.t_ends[s - 1]) return "overlapping intervals";
        }
        for (size_t s = begin; s < end; ++s)
            if (packed.ray_indices[s] != r) return "partition mismatch";
    }
    return std::nullopt;
}

}  // namespace voxmarch
