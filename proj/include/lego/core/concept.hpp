// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lego/core/image.hpp"
#include "lego/core/prompt_template.hpp"
#include "lego/core/vocabulary.hpp"

namespace lego::core {

/// A concept's pseudo-tokens plus the positive (P_i) and negative (N_i) word
/// sets that anchor each token in embedding space.
struct ConceptSpec {
    int n = 1;
    std::vector<int> pseudo_ids;
    std::vector<std::vector<std::string>> positives;
    std::vector<std::vector<std::string>> negatives;
    std::optional<std::string> subject_init_word;

    /// Throws UserError listing every offending word.
    void validate(const Vocabulary& vocab) const;

    /// Parses `{n, positives, negatives, subject_init_word?}`; pseudo ids are
    /// assigned separately by the caller.
    static ConceptSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct Exemplar {
    Image image;
    int template_id = 0;  // index into the pool for the list's kind
};

/// I_C (with concept) and I_C-bar (without), sharing the subject S_e.
struct ExemplarSet {
    std::vector<Exemplar> with_concept;
    std::vector<Exemplar> without_concept;
    std::string subject_name;
    TemplateLibrary templates;

    /// Nonempty, disjoint lists; templates of the right kind.
    void validate() const;
};

}  // namespace lego::core
