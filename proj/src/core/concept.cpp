// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/core/concept.hpp"

#include <set>

#include "lego/core/config.hpp"
#include "lego/core/error.hpp"

namespace lego::core {

void ConceptSpec::validate(const Vocabulary& vocab) const {
    if (n < 1) throw UserError("concept spec: n must be >= 1");
    if (static_cast<int>(positives.size()) != n) {
        throw UserError("concept spec: positives must hold n = " + std::to_string(n) + " lists");
    }
    if (!negatives.empty() && static_cast<int>(negatives.size()) != n) {
        throw UserError("concept spec: negatives must hold n lists (or be omitted)");
    }
    std::vector<std::string> bad;
    auto check = [&](const std::string& w) {
        auto id = vocab.find(w);
        if (!id || vocab.is_pseudo(*id)) bad.push_back(w);
    };
    for (int i = 0; i < n; ++i) {
        if (positives[static_cast<std::size_t>(i)].empty()) {
            throw UserError("concept spec: P_" + std::to_string(i + 1) + " is empty");
        }
        for (const auto& w : positives[static_cast<std::size_t>(i)]) check(w);
        if (!negatives.empty()) {
            for (const auto& w : negatives[static_cast<std::size_t>(i)]) check(w);
        }
    }
    if (subject_init_word) check(*subject_init_word);
    if (!bad.empty()) {
        std::string msg = "concept spec: words outside the vocabulary:";
        for (const auto& w : bad) msg += " " + w;
        throw UserError(msg);
    }
    if (!pseudo_ids.empty()) {
        if (static_cast<int>(pseudo_ids.size()) != n) {
            throw UserError("concept spec: need n pseudo ids");
        }
        std::set<int> seen;
        for (int id : pseudo_ids) {
            if (!vocab.is_pseudo(id)) throw UserError("concept spec: id " + std::to_string(id) + " is not a pseudo-token");
            if (!seen.insert(id).second) throw UserError("concept spec: pseudo ids must be distinct");
        }
    }
}

namespace {

// A flat list of words is shorthand for a single-token spec.
std::vector<std::vector<std::string>> word_lists(const nlohmann::json& j) {
    if (j.is_array() && !j.empty() && j.front().is_string()) {
        return {j.get<std::vector<std::string>>()};
    }
    return j.get<std::vector<std::vector<std::string>>>();
}

}  // namespace

ConceptSpec ConceptSpec::from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"n", "positives", "negatives", "subject_init_word"}, "concept spec");
    ConceptSpec s;
    try {
        s.n = j.at("n").get<int>();
        s.positives = word_lists(j.at("positives"));
        if (j.contains("negatives")) {
            s.negatives = word_lists(j.at("negatives"));
        }
        if (j.contains("subject_init_word") && !j.at("subject_init_word").is_null()) {
            s.subject_init_word = j.at("subject_init_word").get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("concept spec: ") + e.what());
    }
    if (s.n < 1) throw UserError("concept spec: n must be >= 1");
    if (static_cast<int>(s.positives.size()) != s.n) {
        throw UserError("concept spec: positives must hold n lists");
    }
    for (const auto& p : s.positives) {
        if (p.empty()) throw UserError("concept spec: empty positives list");
    }
    return s;
}

nlohmann::json ConceptSpec::to_json() const {
    nlohmann::json j = {{"n", n}, {"positives", positives}, {"negatives", negatives},
                        {"pseudo_ids", pseudo_ids}};
    j["subject_init_word"] = subject_init_word ? nlohmann::json(*subject_init_word) : nlohmann::json();
    return j;
}

void ExemplarSet::validate() const {
    if (with_concept.empty()) throw UserError("exemplar set: I_C is empty");
    if (without_concept.empty()) throw UserError("exemplar set: I_C-bar is empty");
    for (const auto& a : with_concept) {
        for (const auto& b : without_concept) {
            if (a.image == b.image) throw UserError("exemplar set: an image appears in both lists");
        }
    }
    auto check = [](const std::vector<Exemplar>& list, const std::vector<PromptTemplate>& pool,
                    TemplateKind kind, const char* name) {
        for (const auto& e : list) {
            if (e.template_id < 0 || e.template_id >= static_cast<int>(pool.size())) {
                throw UserError(std::string("exemplar set: template id out of range in ") + name);
            }
            if (pool[static_cast<std::size_t>(e.template_id)].kind() != kind) {
                throw UserError(std::string("exemplar set: wrong template kind in ") + name);
            }
        }
    };
    check(with_concept, templates.with_concept, TemplateKind::SubjectPlusConcept, "I_C");
    check(without_concept, templates.subject_only, TemplateKind::SubjectOnly, "I_C-bar");
}

}  // namespace lego::core
