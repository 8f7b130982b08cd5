// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lego/core/concept.hpp"
#include "lego/core/vocabulary.hpp"
#include "lego/corpus/scene.hpp"
#include "lego/corpus/transforms.hpp"

namespace lego::corpus {

/// One weighted slice of the pretraining corpus.
struct MixEntry {
    std::string transform = "none";  // registry name or "none"
    double weight = 1.0;
    std::vector<std::string> words;  // concept words drawn for the caption
    std::string style = "adjective";  // "adjective" or "count"
    double word_probability = 1.0;   // chance that a word appears at all

    nlohmann::json to_json() const;
    static MixEntry from_json(const nlohmann::json& j);
};

struct CorpusConfig {
    int count = 2000;
    std::uint64_t seed = 0;
    std::vector<std::string> shapes{"circle", "square", "triangle"};
    std::vector<std::string> colors{"red", "green", "blue", "purple"};
    double size_min = 0.35;
    double size_max = 0.55;
    double jitter = 3.0;
    std::vector<MixEntry> mix = default_mix();
    /// Transforms whose words never appear in captions.
    std::vector<std::string> held_out{"squashed", "frozen"};
    /// When true, images showing a held-out transform are excluded entirely;
    /// otherwise they appear with concept-free captions.
    bool concept_visually_held_out = true;

    static std::vector<MixEntry> default_mix();
    void validate(const TransformRegistry& registry) const;
    nlohmann::json to_json() const;
    static CorpusConfig from_json(const nlohmann::json& j);
};

struct CorpusRecord {
    std::string path;  // relative to the corpus directory
    std::string caption;
    SubjectParams subject;
    std::string transform = "none";
    std::uint64_t seed = 0;
    Image image;

    nlohmann::json to_json() const;
};

using CorpusManifest = std::vector<CorpusRecord>;

/// Throws UserError for configs naming unknown transforms or words missing
/// from `vocab`.
CorpusManifest build_pretraining_corpus(const CorpusConfig& config, const core::Vocabulary& vocab,
                                        const TransformRegistry& registry = TransformRegistry::defaults());

/// Throws UserError naming the first caption with a word outside `vocab` or
/// a pseudo-token.
void validate_captions(const CorpusManifest& manifest, const core::Vocabulary& vocab);

/// Writes PNGs under `dir/images` and `dir/manifest.jsonl`.
void write_corpus(const CorpusManifest& manifest, const std::filesystem::path& dir);
/// Reads the manifest and every image it references.
CorpusManifest read_corpus(const std::filesystem::path& dir);

/// Substitutes `{subj}` and `{cpt_i}` with plain words.
std::string fill_template(const std::string& text, const std::string& subject,
                          const std::vector<std::string>& concept_words);

/// I_C holds the subject with the transform applied, I_C-bar the plain
/// subject. Templates come from the numeric library for transforms with a
/// cardinality and from the adjective library with `concept_tokens` slots
/// otherwise. Throws UserError unless both counts are >= 1.
core::ExemplarSet make_exemplars(const SubjectParams& subject, const ConceptTransform& transform, int m_with,
                                 int m_without, std::uint64_t seed, int concept_tokens = 1);

}  // namespace lego::corpus
