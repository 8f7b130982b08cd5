// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>

#include "lego/core/image.hpp"
#include "lego/corpus/scene.hpp"
#include "lego/corpus/transforms.hpp"

namespace lego::eval {

/// Fraction of images on which the transform's detector fires.
double concept_accuracy(std::span<const core::Image> images, const corpus::ConceptTransform& transform);

/// Which attribute of the exemplar subject counts as leaked.
enum class LeakageSignature { Color, Shape };

/// Color when the two subjects differ in color, otherwise shape. Throws
/// UserError when they share both.
LeakageSignature leakage_signature(const corpus::SubjectParams& exemplar, const corpus::SubjectParams& target);

/// Fraction of images showing the exemplar subject's signature attribute:
/// its fill color dominating the foreground, or its shape.
double leakage_score(std::span<const core::Image> images, const corpus::SubjectParams& exemplar,
                     const corpus::SubjectParams& target);

/// Fraction of images whose dominant color is the target's (or its
/// complement) and whose shape is the target's.
double subject_fidelity(std::span<const core::Image> images, const corpus::SubjectParams& target);

/// Foreground components of at least four pixels.
int cardinality_count(const core::Image& image);

std::map<int, int> cardinality_histogram(std::span<const core::Image> images);

/// Fraction of images with exactly `k` counted subjects.
double count_accuracy(std::span<const core::Image> images, int k);

}  // namespace lego::eval
