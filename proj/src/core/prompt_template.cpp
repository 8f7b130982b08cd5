// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/core/prompt_template.hpp"

#include <algorithm>
#include <charconv>
#include <optional>
#include <set>

#include "lego/core/error.hpp"

namespace lego::core {
namespace {

constexpr std::string_view kSubject = "{subj}";

// Returns i for a `{cpt_i}` token (i >= 1).
std::optional<int> concept_index(std::string_view tok) {
    constexpr std::string_view prefix = "{cpt_";
    if (tok.size() <= prefix.size() + 1 || !tok.starts_with(prefix) || tok.back() != '}') {
        return std::nullopt;
    }
    const auto digits = tok.substr(prefix.size(), tok.size() - prefix.size() - 1);
    int value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || value < 1) {
        throw UserError("malformed placeholder '" + std::string(tok) + "'");
    }
    return value;
}

bool looks_like_placeholder(std::string_view tok) {
    return tok.size() >= 2 && tok.front() == '{' && tok.back() == '}';
}

}  // namespace

std::string to_string(TemplateKind kind) {
    switch (kind) {
        case TemplateKind::SubjectOnly: return "subject-only";
        case TemplateKind::SubjectPlusConcept: return "subject-plus-concept";
        case TemplateKind::ConceptOnly: return "concept-only";
    }
    return "?";
}

TemplateKind template_kind_from_string(const std::string& s) {
    if (s == "subject-only") return TemplateKind::SubjectOnly;
    if (s == "subject-plus-concept") return TemplateKind::SubjectPlusConcept;
    if (s == "concept-only") return TemplateKind::ConceptOnly;
    throw UserError("unknown template kind '" + s + "'");
}

PromptTemplate::PromptTemplate(std::string text, TemplateKind kind)
    : text_(std::move(text)), kind_(kind) {
    std::set<int> indices;
    int subject_count = 0;
    for (const auto& tok : split_words(text_)) {
        if (tok == kSubject) {
            ++subject_count;
        } else if (auto i = concept_index(tok)) {
            if (!indices.insert(*i).second) {
                throw UserError("template repeats {cpt_" + std::to_string(*i) + "}: " + text_);
            }
        } else if (looks_like_placeholder(tok)) {
            throw UserError("unknown placeholder '" + tok + "' in template: " + text_);
        }
    }
    if (subject_count > 1) throw UserError("template has more than one {subj}: " + text_);
    has_subject_ = subject_count == 1;
    arity_ = static_cast<int>(indices.size());
    if (!indices.empty() && *indices.rbegin() != arity_) {
        throw UserError("template concept placeholders must be {cpt_1}..{cpt_n} without gaps: " + text_);
    }
    switch (kind_) {
        case TemplateKind::SubjectOnly:
            if (!has_subject_ || arity_ != 0) {
                throw UserError("subject-only template needs {subj} and no {cpt_i}: " + text_);
            }
            break;
        case TemplateKind::SubjectPlusConcept:
            if (!has_subject_ || arity_ == 0) {
                throw UserError("subject-plus-concept template needs {subj} and {cpt_1}..: " + text_);
            }
            break;
        case TemplateKind::ConceptOnly:
            if (has_subject_ || arity_ == 0) {
                throw UserError("concept-only template needs {cpt_1}.. and no {subj}: " + text_);
            }
            break;
    }
}

PromptTemplate PromptTemplate::without_subject() const {
    std::string out;
    for (const auto& tok : split_words(text_)) {
        if (tok == kSubject) continue;
        if (!out.empty()) out += ' ';
        out += tok;
    }
    return PromptTemplate(out, TemplateKind::ConceptOnly);
}

PromptTemplate PromptTemplate::from_json(const nlohmann::json& j) {
    try {
        return PromptTemplate(j.at("text").get<std::string>(),
                              template_kind_from_string(j.at("kind").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("template: ") + e.what());
    }
}

std::vector<int> render_template(const PromptTemplate& tmpl, const Vocabulary& vocab,
                                 std::span<const int> subject_tokens,
                                 std::span<const int> cpt_ids) {
    if (static_cast<int>(cpt_ids.size()) != tmpl.concept_arity()) {
        throw UserError("template expects " + std::to_string(tmpl.concept_arity()) +
                        " concept tokens, got " + std::to_string(cpt_ids.size()) + ": " +
                        tmpl.text());
    }
    if (tmpl.has_subject() && subject_tokens.empty()) {
        throw UserError("template needs a subject: " + tmpl.text());
    }
    for (int id : subject_tokens) {
        if (!vocab.valid(id)) throw UserError("subject token id out of range");
    }
    for (int id : cpt_ids) {
        if (!vocab.is_pseudo(id)) throw UserError("concept slots take pseudo-token ids, got " + std::to_string(id));
    }
    std::vector<int> out;
    for (const auto& tok : split_words(tmpl.text())) {
        if (tok == kSubject) {
            out.insert(out.end(), subject_tokens.begin(), subject_tokens.end());
        } else if (auto i = concept_index(tok)) {
            out.push_back(cpt_ids[static_cast<std::size_t>(*i - 1)]);
        } else {
            out.push_back(vocab.id(tok));
        }
    }
    return out;
}

const std::vector<PromptTemplate>& TemplateLibrary::pool(TemplateKind kind) const {
    return kind == TemplateKind::SubjectOnly ? subject_only : with_concept;
}

nlohmann::json TemplateLibrary::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : subject_only) arr.push_back(t.to_json());
    for (const auto& t : with_concept) arr.push_back(t.to_json());
    return {{"templates", arr}};
}

TemplateLibrary TemplateLibrary::from_json(const nlohmann::json& j) {
    TemplateLibrary lib;
    try {
        for (const auto& item : j.at("templates")) {
            auto t = PromptTemplate::from_json(item);
            (t.kind() == TemplateKind::SubjectOnly ? lib.subject_only : lib.with_concept)
                .push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("templates.json: ") + e.what());
    }
    return lib;
}

namespace {

const std::vector<std::string>& prefixes() {
    static const std::vector<std::string> p = {
        "a photo of a", "a", "a picture of a", "a rendering of a",
        "an image of a", "a drawing of a", "the", "a photo of the",
    };
    return p;
}

}  // namespace

TemplateLibrary TemplateLibrary::adjective(int n) {
    if (n < 1) throw UserError("concept token count must be >= 1");
    std::string cpts;
    for (int i = 1; i <= n; ++i) cpts += "{cpt_" + std::to_string(i) + "} ";
    TemplateLibrary lib;
    for (const auto& p : prefixes()) {
        lib.subject_only.emplace_back(p + " {subj}", TemplateKind::SubjectOnly);
        lib.with_concept.emplace_back(p + " " + cpts + "{subj}", TemplateKind::SubjectPlusConcept);
    }
    return lib;
}

TemplateLibrary TemplateLibrary::numeric() {
    static const std::vector<std::string> count_prefixes = {
        "a photo of", "", "a picture of", "a rendering of",
        "an image of", "a drawing of", "the", "a photo of the",
    };
    TemplateLibrary lib;
    for (std::size_t i = 0; i < count_prefixes.size(); ++i) {
        lib.subject_only.emplace_back(prefixes()[i] + " {subj}", TemplateKind::SubjectOnly);
        const std::string p = count_prefixes[i].empty() ? "" : count_prefixes[i] + " ";
        lib.with_concept.emplace_back(p + "{cpt_1} {subj}", TemplateKind::SubjectPlusConcept);
    }
    return lib;
}

}  // namespace lego::core
