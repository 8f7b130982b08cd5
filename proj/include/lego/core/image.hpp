// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

namespace lego::core {

using Rgb = std::array<double, 3>;

/// Planar (CHW) RGB image with values in [-1, 1].
class Image {
public:
    static constexpr int kChannels = 3;

    Image() = default;
    Image(int height, int width, double fill = 0.0)
        : height_(height), width_(width),
          data_(static_cast<std::size_t>(kChannels * height * width), fill) {}

    int height() const { return height_; }
    int width() const { return width_; }
    int pixels() const { return height_ * width_; }
    bool empty() const { return data_.empty(); }

    double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
    double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

    /// Pixel as [0,1] RGB.
    Rgb rgb(int y, int x) const;
    void set_rgb(int y, int x, const Rgb& unit);

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    void clamp();
    /// Snaps every value to the nearest 8-bit level (the PNG grid).
    void quantize();

    bool operator==(const Image&) const = default;

private:
    std::size_t index(int c, int y, int x) const {
        return static_cast<std::size_t>((c * height_ + y) * width_ + x);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

std::uint8_t to_byte(double v);
double from_byte(std::uint8_t b);

/// 8-bit RGB PNG; values mapped from [-1,1] to [0,255].
std::vector<std::uint8_t> encode_png(const Image& img);
void write_png(const Image& img, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

}  // namespace lego::core
