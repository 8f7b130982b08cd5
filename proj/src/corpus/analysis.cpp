// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/corpus/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace lego::corpus {

int Mask::count() const {
    return static_cast<int>(std::count(on.begin(), on.end(), static_cast<unsigned char>(1)));
}

Mask foreground(const Image& img) {
    Mask m{img.height(), img.width(), std::vector<unsigned char>(static_cast<std::size_t>(img.pixels()), 0)};
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Rgb c = img.rgb(y, x);
            double dev = 0.0;
            for (int k = 0; k < 3; ++k) dev = std::max(dev, std::abs(c[k] - kBackground[k]));
            if (dev > 0.15) m.on[static_cast<std::size_t>(y * img.width() + x)] = 1;
        }
    }
    return m;
}

bool is_whitish(const Rgb& c) { return c[0] >= 0.62 && c[1] >= 0.62 && c[2] >= 0.62; }

std::vector<Component> connected_components(const Mask& mask) {
    std::vector<int> label(mask.on.size(), -1);
    std::vector<Component> comps;
    std::vector<int> stack;
    for (int start = 0; start < static_cast<int>(mask.on.size()); ++start) {
        if (!mask.on[static_cast<std::size_t>(start)] || label[static_cast<std::size_t>(start)] >= 0) continue;
        Component comp;
        comp.min_x = comp.min_y = 1 << 30;
        comp.max_x = comp.max_y = -1;
        const int id = static_cast<int>(comps.size());
        stack.assign(1, start);
        label[static_cast<std::size_t>(start)] = id;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            comp.pixels.push_back(p);
            const int y = p / mask.width, x = p % mask.width;
            comp.min_x = std::min(comp.min_x, x);
            comp.max_x = std::max(comp.max_x, x);
            comp.min_y = std::min(comp.min_y, y);
            comp.max_y = std::max(comp.max_y, y);
            const int nbrs[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
            for (const auto& n : nbrs) {
                if (n[0] < 0 || n[0] >= mask.height || n[1] < 0 || n[1] >= mask.width) continue;
                const int q = n[0] * mask.width + n[1];
                if (mask.on[static_cast<std::size_t>(q)] && label[static_cast<std::size_t>(q)] < 0) {
                    label[static_cast<std::size_t>(q)] = id;
                    stack.push_back(q);
                }
            }
        }
        std::sort(comp.pixels.begin(), comp.pixels.end());
        comps.push_back(std::move(comp));
    }
    std::stable_sort(comps.begin(), comps.end(),
                     [](const Component& a, const Component& b) { return a.area() > b.area(); });
    return comps;
}

int count_subjects(const Image& img) {
    int n = 0;
    for (const auto& c : connected_components(foreground(img))) {
        if (c.area() >= 4) ++n;
    }
    return n;
}

std::optional<std::string> dominant_color(const Image& img) {
    const Mask fg = foreground(img);
    std::map<std::string, int> votes;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            if (!fg.at(y, x)) continue;
            const Rgb c = img.rgb(y, x);
            if (is_whitish(c)) continue;
            double best = 1e9;
            std::string best_name;
            for (const auto& pc : palette()) {
                for (int inv = 0; inv < 2; ++inv) {
                    const Rgb ref = inv ? complement(pc.rgb) : pc.rgb;
                    double d = 0.0;
                    for (int k = 0; k < 3; ++k) d += (c[k] - ref[k]) * (c[k] - ref[k]);
                    if (d < best) {
                        best = d;
                        best_name = inv ? "~" + pc.name : pc.name;
                    }
                }
            }
            ++votes[best_name];
        }
    }
    if (votes.empty()) return std::nullopt;
    // std::map iteration order makes ties deterministic.
    auto best = std::max_element(votes.begin(), votes.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    return best->first;
}

std::optional<Shape> classify_shape(const Image& img) {
    const auto comps = connected_components(foreground(img));
    if (comps.empty() || comps.front().area() < 4) return std::nullopt;
    const auto& c = comps.front();
    const int w = c.max_x - c.min_x + 1;
    const int h = c.max_y - c.min_y + 1;
    std::vector<char> in(static_cast<std::size_t>(w * h), 0);
    for (int p : c.pixels) {
        const int y = p / img.width() - c.min_y;
        const int x = p % img.width() - c.min_x;
        in[static_cast<std::size_t>(y * w + x)] = 1;
    }
    // Occupancy of the bounding-box corner patches.
    const int pw = std::max(1, static_cast<int>(std::lround(0.2 * w)));
    const int ph = std::max(1, static_cast<int>(std::lround(0.2 * h)));
    auto patch = [&](int x0, int y0) {
        int hit = 0;
        for (int y = y0; y < y0 + ph; ++y) {
            for (int x = x0; x < x0 + pw; ++x) hit += in[static_cast<std::size_t>(y * w + x)];
        }
        return static_cast<double>(hit) / (pw * ph);
    };
    const double top = 0.5 * (patch(0, 0) + patch(w - pw, 0));
    const double bottom = 0.5 * (patch(0, h - ph) + patch(w - pw, h - ph));
    if (top >= 0.35 && bottom >= 0.35) return Shape::Square;
    if (bottom >= 0.35) return Shape::Triangle;
    return Shape::Circle;
}

std::optional<SubjectGuess> classify_subject(const Image& img) {
    auto shape = classify_shape(img);
    auto color = dominant_color(img);
    if (!shape || !color) return std::nullopt;
    return SubjectGuess{*shape, *color};
}

}  // namespace lego::corpus
