// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lego/core/image.hpp"

namespace lego::corpus {

using core::Image;
using core::Rgb;

inline constexpr int kCanvas = 32;
inline constexpr Rgb kBackground = {0.5, 0.5, 0.5};

enum class Shape { Circle, Square, Triangle };

std::string to_string(Shape s);
Shape shape_from_string(const std::string& s);

struct PaletteColor {
    std::string name;
    Rgb rgb;
};

/// Named fill colors. Their complements (used by the inverted transform) are
/// far from every base color, which keeps the inverted detector unambiguous.
const std::vector<PaletteColor>& palette();
const PaletteColor& palette_color(const std::string& name);
Rgb complement(const Rgb& c);

struct SubjectParams {
    Shape shape = Shape::Circle;
    std::string color = "red";  // palette name
    double size = 0.45;         // bounding-box side as a fraction of the canvas
    double jitter = 3.0;        // max center offset in pixels

    /// Throws UserError when size is outside [0.2, 0.6] or the color is unknown.
    void validate() const;
    Rgb fill() const { return palette_color(color).rgb; }
    /// "red circle"
    std::string phrase() const { return color + " " + to_string(shape); }

    nlohmann::json to_json() const;
    static SubjectParams from_json(const nlohmann::json& j);
    bool operator==(const SubjectParams&) const = default;
};

/// One drawn instance of the subject (center in pixels, per-axis scale).
struct Placement {
    double cx = 16.0;
    double cy = 16.0;
    double side = 14.4;  // unscaled bounding-box side in pixels
    double scale_x = 1.0;
    double scale_y = 1.0;
};

/// Image plus the subject layer it was drawn from.
struct Scene {
    SubjectParams subject;
    std::vector<Placement> instances;
    Image image;
    std::vector<double> alpha;  // subject coverage per pixel, [0,1]
    Rgb fill;

    double alpha_at(int y, int x) const { return alpha[static_cast<std::size_t>(y * image.width() + x)]; }
};

/// Antialiased coverage of one placement at pixel (x, y), 4x4 supersampled.
double coverage(Shape shape, const Placement& p, int x, int y);

/// Draws `instances` with `fill` on the neutral background.
void rasterize(Scene& scene);

Scene render_scene(const SubjectParams& params, std::uint64_t seed);
/// Deterministic for a fixed seed; values in [-1,1] on the 8-bit grid.
Image render_subject(const SubjectParams& params, std::uint64_t seed);

}  // namespace lego::corpus
