// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lego/core/vocabulary.hpp"

namespace lego::core {

enum class TemplateKind {
    SubjectOnly,         // `{subj}` and no `{cpt_i}`
    SubjectPlusConcept,  // `{subj}` and every `{cpt_1}..{cpt_n}`
    ConceptOnly,         // every `{cpt_i}`, no `{subj}` (ablation cells without subject separation)
};

std::string to_string(TemplateKind kind);
TemplateKind template_kind_from_string(const std::string& s);

/// Prompt text with whitespace-delimited placeholders `{subj}` and `{cpt_i}`.
class PromptTemplate {
public:
    /// Validates the placeholder set against `kind`; throws UserError.
    PromptTemplate(std::string text, TemplateKind kind);

    const std::string& text() const { return text_; }
    TemplateKind kind() const { return kind_; }
    int concept_arity() const { return arity_; }
    bool has_subject() const { return has_subject_; }

    /// Copy with the `{subj}` placeholder removed (TI-style prompt).
    PromptTemplate without_subject() const;

    nlohmann::json to_json() const { return {{"text", text_}, {"kind", to_string(kind_)}}; }
    static PromptTemplate from_json(const nlohmann::json& j);

    bool operator==(const PromptTemplate&) const = default;

private:
    std::string text_;
    TemplateKind kind_;
    int arity_ = 0;
    bool has_subject_ = false;
};

/// Substitutes `{subj}` with `subject_tokens` (one pseudo id, or the ids of an
/// ordinary-word phrase) and `{cpt_i}` with `cpt_ids[i-1]`; ordinary words go
/// through vocabulary lookup.
std::vector<int> render_template(const PromptTemplate& tmpl, const Vocabulary& vocab,
                                 std::span<const int> subject_tokens,
                                 std::span<const int> cpt_ids);

inline std::vector<int> render_template(const PromptTemplate& tmpl, const Vocabulary& vocab,
                                        int subj_id, std::span<const int> cpt_ids) {
    const int subject[1] = {subj_id};
    return render_template(tmpl, vocab, subject, cpt_ids);
}

/// Template pools cycled during inversion, one pool per kind.
struct TemplateLibrary {
    std::vector<PromptTemplate> subject_only;
    std::vector<PromptTemplate> with_concept;

    const std::vector<PromptTemplate>& pool(TemplateKind kind) const;

    nlohmann::json to_json() const;
    static TemplateLibrary from_json(const nlohmann::json& j);

    /// Eight adjective-style variants per kind for an n-token concept
    /// ("a photo of a {cpt_1} .. {cpt_n} {subj}").
    static TemplateLibrary adjective(int n);
    /// Eight count-style variants ("a photo of {cpt_1} {subj}").
    static TemplateLibrary numeric();
};

}  // namespace lego::core
