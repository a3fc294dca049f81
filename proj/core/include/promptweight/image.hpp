#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace promptweight {

/// Row-major H x W x 3 image with components normalized to [0, 1].
class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int width, int height, double fill = 0.0);

    int width() const { return width_; }
    int height() const { return height_; }

    double& at(int x, int y, int c) { return pixels_[index(x, y, c)]; }
    double at(int x, int y, int c) const { return pixels_[index(x, y, c)]; }

    std::span<double> data() { return pixels_; }
    std::span<const double> data() const { return pixels_; }

    bool operator==(const RgbImage&) const = default;

private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> pixels_;
};

/// Decodes a PNG or binary/ASCII PPM (P6/P3). 8-bit values are divided by 255.
RgbImage load_image(const std::filesystem::path& path);
RgbImage decode_ppm(std::span<const std::uint8_t> bytes);

/// 8-bit RGB PNG encoding; components are rounded to the nearest of 256 levels.
std::vector<std::uint8_t> encode_png(const RgbImage& img);
void save_png(const std::filesystem::path& path, const RgbImage& img);

}  // namespace promptweight
