#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxmarch/math.hpp"

namespace voxmarch {

// Row-major float image, components nominally in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<Vec3> pixels;

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(size_t(w) * h) {}

    Vec3& at(int x, int y) { return pixels[size_t(y) * width + x]; }
    const Vec3& at(int x, int y) const { return pixels[size_t(y) * width + x]; }
};

uint8_t quantize_channel(double value);

// Binary PPM (P6, 8-bit).
void write_ppm(const Image& image, const std::string& path);
Image read_ppm(const std::string& path);

// Peak signal-to-noise ratio for images in [0,1]: 10 log10(1 / MSE).
double psnr(const Image& a, const Image& b);

}  // namespace voxmarch
