// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/corpus/scene.hpp"

#include <cmath>

#include "lego/core/error.hpp"
#include "lego/core/rng.hpp"

namespace lego::corpus {

std::string to_string(Shape s) {
    switch (s) {
        case Shape::Circle: return "circle";
        case Shape::Square: return "square";
        case Shape::Triangle: return "triangle";
    }
    return "?";
}

Shape shape_from_string(const std::string& s) {
    if (s == "circle") return Shape::Circle;
    if (s == "square") return Shape::Square;
    if (s == "triangle") return Shape::Triangle;
    throw UserError("unknown shape '" + s + "'");
}

const std::vector<PaletteColor>& palette() {
    static const std::vector<PaletteColor> p = {
        {"red", {0.85, 0.12, 0.12}},
        {"green", {0.12, 0.70, 0.15}},
        {"blue", {0.12, 0.22, 0.88}},
        {"purple", {0.55, 0.12, 0.65}},
    };
    return p;
}

const PaletteColor& palette_color(const std::string& name) {
    for (const auto& c : palette()) {
        if (c.name == name) return c;
    }
    throw UserError("unknown color '" + name + "'");
}

Rgb complement(const Rgb& c) { return {1.0 - c[0], 1.0 - c[1], 1.0 - c[2]}; }

void SubjectParams::validate() const {
    if (!(size >= 0.2 && size <= 0.6)) {
        throw UserError("subject size fraction must be in [0.2, 0.6], got " + std::to_string(size));
    }
    if (!(jitter >= 0.0)) throw UserError("subject jitter must be >= 0");
    const double half = size * kCanvas / 2.0;
    if (kCanvas / 2.0 - jitter - half < 0.0) throw UserError("subject jitter pushes it off the canvas");
    palette_color(color);
}

nlohmann::json SubjectParams::to_json() const {
    return {{"shape", to_string(shape)}, {"color", color}, {"size", size}, {"jitter", jitter}};
}

SubjectParams SubjectParams::from_json(const nlohmann::json& j) {
    SubjectParams p;
    try {
        p.shape = shape_from_string(j.at("shape").get<std::string>());
        p.color = j.at("color").get<std::string>();
        p.size = j.value("size", p.size);
        p.jitter = j.value("jitter", p.jitter);
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("subject: ") + e.what());
    }
    p.validate();
    return p;
}

namespace {

bool inside(Shape shape, double u, double v) {
    // (u, v) in the unit box [-0.5, 0.5]^2, v pointing down.
    switch (shape) {
        case Shape::Circle: return u * u + v * v <= 0.25;
        case Shape::Square: return std::abs(u) <= 0.5 && std::abs(v) <= 0.5;
        case Shape::Triangle:
            // Apex at the top center, base along the bottom edge.
            return v <= 0.5 && v >= -0.5 && std::abs(u) <= (v + 0.5) * 0.5;
    }
    return false;
}

}  // namespace

double coverage(Shape shape, const Placement& p, int x, int y) {
    constexpr int kSub = 4;
    const double w = p.side * p.scale_x;
    const double h = p.side * p.scale_y;
    int hits = 0;
    for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
            const double px = x + (sx + 0.5) / kSub;
            const double py = y + (sy + 0.5) / kSub;
            if (inside(shape, (px - p.cx) / w, (py - p.cy) / h)) ++hits;
        }
    }
    return static_cast<double>(hits) / (kSub * kSub);
}

void rasterize(Scene& scene) {
    scene.image = Image(kCanvas, kCanvas);
    scene.alpha.assign(static_cast<std::size_t>(kCanvas * kCanvas), 0.0);
    for (int y = 0; y < kCanvas; ++y) {
        for (int x = 0; x < kCanvas; ++x) {
            double a = 0.0;
            for (const auto& inst : scene.instances) {
                a = std::max(a, coverage(scene.subject.shape, inst, x, y));
            }
            scene.alpha[static_cast<std::size_t>(y * kCanvas + x)] = a;
            Rgb px;
            for (int c = 0; c < 3; ++c) {
                px[c] = kBackground[c] * (1.0 - a) + scene.fill[c] * a;
            }
            scene.image.set_rgb(y, x, px);
        }
    }
    scene.image.quantize();
}

Scene render_scene(const SubjectParams& params, std::uint64_t seed) {
    params.validate();
    Rng rng(seed);
    Placement p;
    p.side = params.size * kCanvas;
    p.cx = kCanvas / 2.0 + rng.uniform(-params.jitter, params.jitter);
    p.cy = kCanvas / 2.0 + rng.uniform(-params.jitter, params.jitter);
    Scene scene;
    scene.subject = params;
    scene.instances = {p};
    scene.fill = params.fill();
    rasterize(scene);
    return scene;
}

Image render_subject(const SubjectParams& params, std::uint64_t seed) {
    return render_scene(params, seed).image;
}

}  // namespace lego::corpus
