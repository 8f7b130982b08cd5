// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/eval/metrics.hpp"

#include "lego/core/error.hpp"
#include "lego/corpus/analysis.hpp"

namespace lego::eval {
namespace {

template <class Pred> double rate(std::span<const core::Image> images, Pred&& pred) {
    if (images.empty()) return 0.0;
    int hits = 0;
    for (const auto& img : images) hits += pred(img) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(images.size());
}

}  // namespace

double concept_accuracy(std::span<const core::Image> images, const corpus::ConceptTransform& transform) {
    return rate(images, [&](const core::Image& img) { return transform.detect(img); });
}

LeakageSignature leakage_signature(const corpus::SubjectParams& exemplar, const corpus::SubjectParams& target) {
    if (exemplar.color != target.color) return LeakageSignature::Color;
    if (exemplar.shape != target.shape) return LeakageSignature::Shape;
    throw UserError("exemplar and target subjects are indistinguishable (" + exemplar.phrase() + ")");
}

double leakage_score(std::span<const core::Image> images, const corpus::SubjectParams& exemplar,
                     const corpus::SubjectParams& target) {
    const LeakageSignature sig = leakage_signature(exemplar, target);
    return rate(images, [&](const core::Image& img) {
        if (sig == LeakageSignature::Color) {
            const auto c = corpus::dominant_color(img);
            return c && *c == exemplar.color;
        }
        const auto s = corpus::classify_shape(img);
        return s && *s == exemplar.shape;
    });
}

double subject_fidelity(std::span<const core::Image> images, const corpus::SubjectParams& target) {
    return rate(images, [&](const core::Image& img) {
        const auto c = corpus::dominant_color(img);
        const auto s = corpus::classify_shape(img);
        return c && s && *s == target.shape && (*c == target.color || *c == "~" + target.color);
    });
}

int cardinality_count(const core::Image& image) { return corpus::count_subjects(image); }

std::map<int, int> cardinality_histogram(std::span<const core::Image> images) {
    std::map<int, int> h;
    for (const auto& img : images) ++h[cardinality_count(img)];
    return h;
}

double count_accuracy(std::span<const core::Image> images, int k) {
    return rate(images, [&](const core::Image& img) { return cardinality_count(img) == k; });
}

}  // namespace lego::eval
