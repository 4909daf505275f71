#include "voxmarch/image.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace voxmarch {

uint8_t quantize_channel(double value) {
    double scaled = std::round(value * 255.0);
    if (scaled < 0.0) return 0;
    if (scaled > 255.0) return 255;
    return uint8_t(scaled);
}

void write_ppm(const Image& image, const std::string& path) {
    if (image.width <= 0 || image.height <= 0)
        throw std::invalid_argument("ppm: empty image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("ppm: cannot open " + path);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    std::vector<uint8_t> row(size_t(image.width) * 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const Vec3& p = image.at(x, y);
            row[size_t(x) * 3] = quantize_channel(p.x);
            row[size_t(x) * 3 + 1] = quantize_channel(p.y);
            row[size_t(x) * 3 + 2] = quantize_channel(p.z);
        }
        out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
    if (!out) throw std::runtime_error("ppm: write failed");
}

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("ppm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw std::runtime_error("ppm: expected P6");
    int width = 0, height = 0, maxval = 0;
    in >> width >> height >> maxval;
    if (width <= 0 || height <= 0 || maxval != 255)
        throw std::runtime_error("ppm: unsupported header");
    in.get();  // single whitespace after maxval
    Image image(width, height);
    std::vector<uint8_t> raw(size_t(width) * height * 3);
    in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
    if (!in) throw std::runtime_error("ppm: truncated pixel data");
    for (size_t i = 0; i < image.pixels.size(); ++i)
        image.pixels[i] = Vec3{raw[3 * i] / 255.0, raw[3 * i + 1] / 255.0, raw[3 * i + 2] / 255.0};
    return image;
}

double psnr(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height || a.pixels.empty())
        throw std::invalid_argument("psnr: image shape mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        Vec3 d = a.pixels[i] - b.pixels[i];
        sum += dot(d, d);
    }
    double mse = sum / (3.0 * double(a.pixels.size()));
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

}  // namespace voxmarch
