// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/corpus/transforms.hpp"

#include <algorithm>
#include <cmath>

#include "lego/core/error.hpp"
#include "lego/corpus/analysis.hpp"

namespace lego::corpus {
namespace {

constexpr Rgb kStripe = {0.95, 0.95, 0.95};
constexpr Rgb kIce = {0.62, 0.85, 1.0};
constexpr Rgb kIceRim = {0.85, 0.95, 1.0};
constexpr double kSquash = 0.4;
constexpr double kCopySide = 7.0;

Rgb blend(const Rgb& a, const Rgb& b, double t) {
    return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

void paint(Scene& s, int y, int x, const Rgb& color, double a) {
    s.image.set_rgb(y, x, blend(kBackground, color, a));
}

Scene striped(const Scene& in, Rng& rng) {
    Scene s = in;
    // Phase is anchored at the subject's top row so every subject gets a band there.
    int top = kCanvas;
    for (int y = 0; y < kCanvas && top == kCanvas; ++y) {
        for (int x = 0; x < kCanvas; ++x) {
            if (s.alpha_at(y, x) >= 0.5) {
                top = y;
                break;
            }
        }
    }
    const int shift = rng.uniform_int(0, 1);
    for (int y = 0; y < kCanvas; ++y) {
        if (((y - top + shift) % 4 + 4) % 4 >= 2) continue;
        for (int x = 0; x < kCanvas; ++x) {
            const double a = s.alpha_at(y, x);
            if (a > 0.0) paint(s, y, x, kStripe, a);
        }
    }
    s.image.quantize();
    return s;
}

Scene squashed(const Scene& in, Rng& rng) {
    Scene s = in;
    constexpr double kDrip = 3.0;
    for (auto& inst : s.instances) {
        const double h = inst.side * inst.scale_y;
        const double bottom = inst.cy + h / 2.0;
        inst.scale_y *= kSquash;
        inst.cy = bottom - kDrip - inst.side * inst.scale_y / 2.0;
    }
    rasterize(s);
    for (const auto& inst : s.instances) {
        const double w = inst.side * inst.scale_x;
        for (int d = 0; d < 2; ++d) {
            const int x = static_cast<int>(std::floor(inst.cx + rng.uniform(-0.3, 0.3) * w));
            if (x < 0 || x >= kCanvas) continue;
            int lowest = -1;
            for (int y = 0; y < kCanvas; ++y) {
                if (s.alpha_at(y, x) >= 0.5) lowest = y;
            }
            if (lowest < 0) continue;
            const int len = rng.uniform_int(2, 3);
            for (int y = lowest + 1; y <= std::min(kCanvas - 1, lowest + len); ++y) {
                s.alpha[static_cast<std::size_t>(y * kCanvas + x)] = 1.0;
                paint(s, y, x, s.fill, 1.0);
            }
        }
    }
    s.image.quantize();
    return s;
}

Scene frozen(const Scene& in, Rng&) {
    Scene s = in;
    const Rgb tint = blend(s.fill, kIce, 0.55);
    for (int y = 0; y < kCanvas; ++y) {
        for (int x = 0; x < kCanvas; ++x) {
            const double a = s.alpha_at(y, x);
            if (a <= 0.0) continue;
            bool rim = false;
            if (a >= 0.5) {
                const int nbrs[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
                for (const auto& n : nbrs) {
                    if (n[0] < 0 || n[0] >= kCanvas || n[1] < 0 || n[1] >= kCanvas ||
                        s.alpha_at(n[0], n[1]) < 0.5) {
                        rim = true;
                    }
                }
            }
            paint(s, y, x, rim ? kIceRim : tint, rim ? 1.0 : a);
        }
    }
    s.fill = tint;
    s.image.quantize();
    return s;
}

Scene inverted(const Scene& in, Rng&) {
    Scene s = in;
    s.fill = complement(in.fill);
    for (int y = 0; y < kCanvas; ++y) {
        for (int x = 0; x < kCanvas; ++x) {
            const double a = s.alpha_at(y, x);
            if (a > 0.0) paint(s, y, x, s.fill, a);
        }
    }
    s.image.quantize();
    return s;
}

Scene copies(const Scene& in, Rng& rng, int k) {
    Scene s = in;
    std::vector<int> cells = {0, 1, 2, 3, 4, 5, 6, 7, 8};
    for (int i = 8; i > 0; --i) std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(rng.uniform_int(0, i))]);
    s.instances.clear();
    const double pitch = kCanvas / 3.0;
    for (int i = 0; i < k; ++i) {
        const int cell = cells[static_cast<std::size_t>(i)];
        Placement p;
        p.side = kCopySide;
        p.cx = pitch * (cell % 3 + 0.5) + rng.uniform(-0.75, 0.75);
        p.cy = pitch * (cell / 3 + 0.5) + rng.uniform(-0.75, 0.75);
        s.instances.push_back(p);
    }
    rasterize(s);
    return s;
}

bool is_ice_rim(const Rgb& c) {
    return c[0] >= 0.75 && c[1] >= 0.75 && c[2] >= 0.9 && c[2] - c[0] >= 0.08;
}

}  // namespace

bool detect_striped(const Image& img) {
    const Mask fg = foreground(img);
    const int total = fg.count();
    if (total < 12) return false;
    int white = 0;
    int first_row = -1, last_row = -1;
    std::vector<double> row_white(static_cast<std::size_t>(img.height()), -1.0);
    for (int y = 0; y < img.height(); ++y) {
        int n = 0, w = 0;
        for (int x = 0; x < img.width(); ++x) {
            if (!fg.at(y, x)) continue;
            ++n;
            if (is_whitish(img.rgb(y, x))) ++w;
        }
        white += w;
        if (n >= 2) {
            row_white[static_cast<std::size_t>(y)] = static_cast<double>(w) / n;
            if (first_row < 0) first_row = y;
            last_row = y;
        }
    }
    const double frac = static_cast<double>(white) / total;
    if (frac < 0.2 || frac > 0.8) return false;
    int bands = 0, colored_gaps = 0;
    bool in_band = false;
    bool seen_band = false;
    for (int y = first_row; y >= 0 && y <= last_row; ++y) {
        const double r = row_white[static_cast<std::size_t>(y)];
        if (r < 0.0) continue;
        const bool w = r > 0.5;
        if (w && !in_band) ++bands;
        if (!w && in_band && seen_band) ++colored_gaps;
        in_band = w;
        seen_band = seen_band || w;
    }
    return bands >= 2 && colored_gaps >= 1;
}

double body_aspect(const Image& img) {
    const auto comps = connected_components(foreground(img));
    if (comps.empty()) return 0.0;
    const auto& c = comps.front();
    std::vector<int> row_count(static_cast<std::size_t>(img.height()), 0);
    for (int p : c.pixels) ++row_count[static_cast<std::size_t>(p / img.width())];
    const int widest = *std::max_element(row_count.begin(), row_count.end());
    int top = -1, bottom = -1;
    for (int y = 0; y < img.height(); ++y) {
        if (row_count[static_cast<std::size_t>(y)] >= 0.4 * widest) {
            if (top < 0) top = y;
            bottom = y;
        }
    }
    int min_x = img.width(), max_x = -1;
    for (int p : c.pixels) {
        const int y = p / img.width(), x = p % img.width();
        if (y < top || y > bottom) continue;
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
    }
    return static_cast<double>(bottom - top + 1) / (max_x - min_x + 1);
}

bool detect_squashed(const Image& img) {
    const auto comps = connected_components(foreground(img));
    if (comps.empty() || comps.front().area() < 8) return false;
    return body_aspect(img) <= 0.5;
}

bool detect_frozen(const Image& img) {
    const Mask fg = foreground(img);
    const auto comps = connected_components(fg);
    if (comps.empty() || comps.front().area() < 8) return false;
    int rim = 0, icy = 0;
    for (int p : comps.front().pixels) {
        const int y = p / img.width(), x = p % img.width();
        bool boundary = false;
        const int nbrs[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
        for (const auto& n : nbrs) {
            if (n[0] < 0 || n[0] >= img.height() || n[1] < 0 || n[1] >= img.width() || !fg.at(n[0], n[1])) {
                boundary = true;
            }
        }
        if (!boundary) continue;
        ++rim;
        if (is_ice_rim(img.rgb(y, x))) ++icy;
    }
    return rim > 0 && icy >= 0.5 * rim;
}

bool detect_inverted(const Image& img) {
    const auto c = dominant_color(img);
    return c && c->starts_with("~");
}

ConceptTransform make_striped() {
    return {"striped", striped, detect_striped, std::nullopt, false, false};
}

ConceptTransform make_squashed() {
    // Melting flattens the outline, so the shape classifier is not expected to survive.
    return {"squashed", squashed, detect_squashed, std::nullopt, true, false};
}

ConceptTransform make_frozen() {
    // The ice tint moves the fill off its palette color.
    return {"frozen", frozen, detect_frozen, std::nullopt, true, false};
}

ConceptTransform make_inverted() {
    return {"inverted", inverted, detect_inverted, std::nullopt, false, false};
}

ConceptTransform make_copies(int k) {
    if (k < 2 || k > 9) throw UserError("copies transform needs 2 <= k <= 9");
    return {"copies-" + std::to_string(k),
            [k](const Scene& s, Rng& rng) { return copies(s, rng, k); },
            [k](const Image& img) { return count_subjects(img) == k; },
            k, false, true};
}

EntanglementStats measure_entanglement(const Scene& before, const Scene& after) {
    int min_x = kCanvas, max_x = -1, min_y = kCanvas, max_y = -1;
    for (int y = 0; y < kCanvas; ++y) {
        for (int x = 0; x < kCanvas; ++x) {
            if (before.alpha_at(y, x) >= 0.5) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
        }
    }
    int subject = 0, subject_changed = 0, far = 0, far_changed = 0;
    for (int y = 0; y < kCanvas; ++y) {
        for (int x = 0; x < kCanvas; ++x) {
            bool changed = false;
            for (int c = 0; c < 3; ++c) changed = changed || before.image.at(c, y, x) != after.image.at(c, y, x);
            if (before.alpha_at(y, x) >= 0.5) {
                ++subject;
                subject_changed += changed;
            }
            if (x < min_x - 2 || x > max_x + 2 || y < min_y - 2 || y > max_y + 2) {
                ++far;
                far_changed += changed;
            }
        }
    }
    EntanglementStats s;
    s.subject_changed = subject ? static_cast<double>(subject_changed) / subject : 0.0;
    s.far_background_changed = far ? static_cast<double>(far_changed) / far : 0.0;
    return s;
}

SubjectParams sample_subject(Rng& rng, const std::vector<Shape>& shapes,
                             const std::vector<std::string>& colors) {
    SubjectParams p;
    p.shape = shapes[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(shapes.size()) - 1))];
    p.color = colors[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(colors.size()) - 1))];
    p.size = rng.uniform(0.35, 0.55);
    p.jitter = 3.0;
    return p;
}

Scene apply_concept(const Scene& scene, const ConceptTransform& transform, std::uint64_t seed) {
    Rng rng(seed);
    Scene out = transform.apply(scene, rng);
    if (!transform.detect(out.image)) {
        throw UserError("transform '" + transform.name + "' output is not recognized by its own detector");
    }
    return out;
}

void TransformRegistry::add(ConceptTransform t) {
    if (contains(t.name)) throw UserError("transform already registered: " + t.name);
    const std::vector<Shape> shapes = {Shape::Circle, Shape::Square, Shape::Triangle};
    std::vector<std::string> colors;
    for (const auto& c : palette()) colors.push_back(c.name);
    Rng rng(derive_seed(0x5eed, t.name));
    for (int i = 0; i < 24; ++i) {
        const SubjectParams subj = sample_subject(rng, shapes, colors);
        const Scene base = render_scene(subj, rng.engine()());
        if (t.detect(base.image)) {
            throw UserError("registration: '" + t.name + "' detector fires on a plain " + subj.phrase());
        }
        Rng trng(rng.engine()());
        const Scene out = t.apply(base, trng);
        if (!t.detect(out.image)) {
            throw UserError("registration: '" + t.name + "' detector misses its own output on " + subj.phrase());
        }
        const auto e = measure_entanglement(base, out);
        if (e.subject_changed < 0.10) {
            throw UserError("registration: '" + t.name + "' leaves the subject mostly untouched");
        }
        if (!t.scene_level && e.far_background_changed > 0.05) {
            throw UserError("registration: '" + t.name + "' rewrites the far background");
        }
        if (t.identity_destroying) continue;
        const auto guess = classify_subject(out.image);
        const bool color_ok = guess && (guess->color == subj.color || guess->color == "~" + subj.color);
        const bool shape_ok = t.scene_level || (guess && guess->shape == subj.shape);
        if (!color_ok || !shape_ok) {
            throw UserError("registration: '" + t.name + "' destroys the identity of " + subj.phrase());
        }
    }
    transforms_.push_back(std::move(t));
}

const ConceptTransform& TransformRegistry::get(const std::string& name) const {
    const std::string key = name == "triplicate" ? "copies-3" : name;
    for (const auto& t : transforms_) {
        if (t.name == key) return t;
    }
    throw UserError("unknown transform '" + name + "'");
}

bool TransformRegistry::contains(const std::string& name) const {
    const std::string key = name == "triplicate" ? "copies-3" : name;
    return std::any_of(transforms_.begin(), transforms_.end(), [&](const auto& t) { return t.name == key; });
}

const TransformRegistry& TransformRegistry::defaults() {
    static const TransformRegistry registry = [] {
        TransformRegistry r;
        r.add(make_striped());
        r.add(make_squashed());
        r.add(make_frozen());
        r.add(make_inverted());
        for (int k = 2; k <= 5; ++k) r.add(make_copies(k));
        return r;
    }();
    return registry;
}

}  // namespace lego::corpus
