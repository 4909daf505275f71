#pragma once

#include <string>

#include "voxmarch/core_types.hpp"
#include "voxmarch/math.hpp"

namespace voxmarch {

// Pinhole camera, OpenGL convention: looks down -z, +y up, square pixels.
// pose is the world-from-camera transform.
struct PinholeCamera {
    Mat3 rotation;
    Vec3 position;
    double focal = 1.0;  // pixels
    int width = 0;
    int height = 0;
};

// Validates orthonormality (1e-6), det +1, focal > 0, positive dimensions.
void validate_camera(const PinholeCamera& camera);

PinholeCamera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                      int width, int height);

// One ray per pixel through the pixel center, row-major order, unit
// directions.
RayBatch generate_rays(const PinholeCamera& camera, double near, double far);

// {"focal": f, "width": w, "height": h, "pose": [12 numbers, row-major 3x4]}
PinholeCamera load_camera_json(const std::string& path);
void save_camera_json(const PinholeCamera& camera, const std::string& path);

}  // namespace voxmarch
