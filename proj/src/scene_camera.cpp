#include "voxmarch/scene_camera.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace voxmarch {

void validate_camera(const PinholeCamera& camera) {
    if (camera.width <= 0 || camera.height <= 0)
        throw std::invalid_argument("camera: image dimensions must be positive");
    if (!(camera.focal > 0.0)) throw std::invalid_argument("camera: focal must be > 0");
    const Mat3& r = camera.rotation;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double d = dot(r.col(i), r.col(j)) - (i == j ? 1.0 : 0.0);
            if (std::abs(d) > 1e-6)
                throw std::invalid_argument("camera: rotation is not orthonormal");
        }
    if (std::abs(determinant(r) - 1.0) > 1e-6)
        throw std::invalid_argument("camera: rotation determinant must be +1");
}

PinholeCamera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                      int width, int height) {
    Vec3 offset = eye - target;
    if (norm(offset) < 1e-12) throw std::invalid_argument("look_at: eye and target coincide");
    Vec3 z = normalize(offset);  // camera looks down -z, toward the target
    Vec3 x = cross(up, z);
    if (norm(x) < 1e-9) throw std::invalid_argument("look_at: up is parallel to view direction");
    x = normalize(x);
    Vec3 y = cross(z, x);

    PinholeCamera camera;
    camera.rotation = Mat3::from_columns(x, y, z);
    camera.position = eye;
    camera.focal = focal;
    camera.width = width;
    camera.height = height;
    validate_camera(camera);
    return camera;
}

RayBatch generate_rays(const PinholeCamera& camera, double near, double far) {
    validate_camera(camera);
    size_t n = size_t(camera.width) * size_t(camera.height);
    std::vector<Vec3> origins(n, camera.position);
    std::vector<Vec3> directions(n);
    double cx = 0.5 * camera.width;
    double cy = 0.5 * camera.height;
    size_t i = 0;
    for (int row = 0; row < camera.height; ++row) {
        for (int col = 0; col < camera.width; ++col, ++i) {
            // pixel centers; image row 0 is the top of the frame
            Vec3 dir_cam{(col + 0.5 - cx) / camera.focal, (cy - (row + 0.5)) / camera.focal,
                         -1.0};
            directions[i] = normalize(camera.rotation * dir_cam);
        }
    }
    return RayBatch::create(std::move(origins), std::move(directions), near, far);
}

PinholeCamera load_camera_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("camera: cannot open " + path);
    nlohmann::json j;
    in >> j;
    PinholeCamera camera;
    camera.focal = j.at("focal").get<double>();
    camera.width = j.at("width").get<int>();
    camera.height = j.at("height").get<int>();
    auto pose = j.at("pose").get<std::vector<double>>();
    if (pose.size() != 12) throw std::runtime_error("camera: pose must have 12 numbers");
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) camera.rotation.m[3 * row + col] = pose[4 * row + col];
        camera.position[row] = pose[4 * row + 3];
    }
    validate_camera(camera);
    return camera;
}

void save_camera_json(const PinholeCamera& camera, const std::string& path) {
    validate_camera(camera);
    std::vector<double> pose(12);
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) pose[4 * row + col] = camera.rotation.m[3 * row + col];
        pose[4 * row + 3] = camera.position[row];
    }
    nlohmann::json j{{"focal", camera.focal},
                     {"width", camera.width},
                     {"height", camera.height},
                     {"pose", pose}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("camera: cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace voxmarch
