// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lego/core/image.hpp"
#include "lego/corpus/scene.hpp"

namespace lego::corpus {

/// Pixel-level measurements shared by the detectors and the eval metrics.
/// Everything here is rule-based; nothing is learned.

struct Mask {
    int height = 0;
    int width = 0;
    std::vector<unsigned char> on;

    bool at(int y, int x) const { return on[static_cast<std::size_t>(y * width + x)] != 0; }
    int count() const;
};

/// Pixels whose largest channel deviation from the background exceeds 0.15.
Mask foreground(const Image& img);

/// Near-white pixels (stripe color): every channel >= 0.62.
bool is_whitish(const Rgb& c);

struct Component {
    std::vector<int> pixels;  // y * width + x
    int min_x = 0, max_x = 0, min_y = 0, max_y = 0;

    int area() const { return static_cast<int>(pixels.size()); }
};

/// 4-connected components of `mask`, largest first (ties by first pixel).
std::vector<Component> connected_components(const Mask& mask);

/// Connected components of the foreground with fewer than 4 pixels discarded.
int count_subjects(const Image& img);

/// Dominant named color of the foreground, ignoring whitish pixels. Returns a
/// palette name, or "~name" for the complement of a palette color; nullopt when
/// the foreground is empty.
std::optional<std::string> dominant_color(const Image& img);

/// Shape of the largest foreground component from the occupancy of its
/// bounding-box corners: all four filled for squares, the two bottom ones for
/// triangles, none for circles.
std::optional<Shape> classify_shape(const Image& img);

struct SubjectGuess {
    Shape shape;
    std::string color;
};
std::optional<SubjectGuess> classify_subject(const Image& img);

}  // namespace lego::corpus
