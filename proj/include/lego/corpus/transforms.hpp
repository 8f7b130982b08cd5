// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lego/core/rng.hpp"
#include "lego/corpus/scene.hpp"

namespace lego::corpus {

/// A subject-entangled image rewrite paired with the rule-based detector that
/// serves as its ground-truth oracle.
struct ConceptTransform {
    std::string name;
    std::function<Scene(const Scene&, Rng&)> apply;
    std::function<bool(const Image&)> detect;
    std::optional<int> cardinality;
    // The base subject's shape is not expected to survive the rewrite.
    bool identity_destroying = false;
    // Rewrites the scene layout (new instances in the background), so the
    // far-background bound of the entanglement check does not apply.
    bool scene_level = false;
};

struct EntanglementStats {
    double subject_changed = 0.0;          // fraction of subject-mask pixels modified
    double far_background_changed = 0.0;   // fraction of far-background pixels modified
};

/// Subject mask: alpha >= 0.5 before the rewrite. Far background: pixels more
/// than 2 px (Chebyshev) outside the subject's bounding box.
EntanglementStats measure_entanglement(const Scene& before, const Scene& after);

/// Draws a subject from the corpus distribution: size in [0.35, 0.55], jitter 3 px.
SubjectParams sample_subject(Rng& rng, const std::vector<Shape>& shapes,
                             const std::vector<std::string>& colors);

class TransformRegistry {
public:
    /// Verifies the registration contract over a handful of seeded subjects
    /// (detector true on output, false on the plain render, entanglement
    /// bounds, subject identity) and throws UserError on mismatch.
    void add(ConceptTransform t);

    const ConceptTransform& get(const std::string& name) const;
    bool contains(const std::string& name) const;
    const std::vector<ConceptTransform>& all() const { return transforms_; }

    /// striped, squashed, frozen, inverted, copies-2..copies-5 ("triplicate" = copies-3).
    static const TransformRegistry& defaults();

private:
    std::vector<ConceptTransform> transforms_;
};

ConceptTransform make_striped();
ConceptTransform make_squashed();
ConceptTransform make_frozen();
ConceptTransform make_inverted();
ConceptTransform make_copies(int k);

/// Applies the transform and checks its own detector fires on the result;
/// a miss is a transform/detector mismatch and throws UserError.
Scene apply_concept(const Scene& scene, const ConceptTransform& transform, std::uint64_t seed);

bool detect_striped(const Image& img);
bool detect_squashed(const Image& img);
bool detect_frozen(const Image& img);
bool detect_inverted(const Image& img);

/// Height/width of the subject body (rows at least 40% as wide as the widest row).
double body_aspect(const Image& img);

}  // namespace lego::corpus
