// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lego/core/concept.hpp"
#include "lego/core/config.hpp"
#include "lego/corpus/scene.hpp"
#include "lego/corpus/transforms.hpp"
#include "lego/diffusion/backbone.hpp"
#include "lego/diffusion/sampler.hpp"

namespace lego::eval {

struct AblationCell {
    bool subject_separation = true;
    bool context_loss = true;

    /// "lego", "ss-only", "reversion-like", "ti-like".
    std::string name() const;
    static AblationCell from_name(const std::string& name);
    static std::vector<AblationCell> all();
    bool operator==(const AblationCell&) const = default;
};

struct EvalConfig {
    core::InversionConfig inversion;
    diffusion::SampleOptions sampling{50, 0, 3.0, diffusion::SamplerKind::Ancestral};
    int n_samples = 100;
    std::uint64_t seed = 0;
    int m_with = 2;
    int m_without = 2;
    /// `{subj}` takes the target subject's words.
    std::string generation_template = "a photo of a {cpt_1} {subj}";

    void validate() const;
    nlohmann::json to_json() const;
    static EvalConfig from_json(const nlohmann::json& j);
    std::string hash() const;
};

/// Seeds shared by every cell of a run.
std::vector<std::uint64_t> sample_seeds(std::uint64_t root, int n);

std::vector<core::Image> generate(const diffusion::Backbone& backbone, const core::EmbeddingTable& table,
                                  std::span<const int> prompt, std::span<const std::uint64_t> seeds,
                                  const diffusion::SampleOptions& options);

struct CellResult {
    std::string name;
    AblationCell cell;
    int m_with = 0;
    bool failed = false;
    std::string error;
    double concept_accuracy = 0.0;
    double subject_fidelity = 0.0;
    double leakage_score = 0.0;
    std::optional<double> count_accuracy;
    std::map<int, int> cardinality;
    int n_samples = 0;
    std::string prompt;
    std::string embedding_hash;
    std::vector<std::string> top_words;  // neighbors of the first concept token
    nlohmann::json final_losses;
    nlohmann::json notes = nlohmann::json::array();
};

struct EvalReport {
    std::string kind;
    nlohmann::json scenario;
    std::vector<std::uint64_t> seeds;
    std::vector<CellResult> cells;

    const CellResult& cell(const std::string& name) const;
    nlohmann::json to_json() const;
    std::string to_csv() const;
    /// Writes `report.json` and `report.csv`.
    void write(const std::filesystem::path& dir) const;
};

struct Scenario {
    corpus::SubjectParams subject;
    std::string transform;
    corpus::SubjectParams target;
    core::ConceptSpec spec;

    nlohmann::json to_json() const;
};

/// Runs lego_optimize under each cell's flags (lambda forced to 0 without
/// the context loss), generates `n_samples` images of the target subject on
/// the shared seed list and scores them. A cell that throws is marked failed.
EvalReport run_ablation(const diffusion::Backbone& backbone, const Scenario& scenario,
                        std::span<const AblationCell> cells, const EvalConfig& config,
                        const corpus::TransformRegistry& registry = corpus::TransformRegistry::defaults());

/// Lego cell only, one row per I_C size. Sizes below two are flagged.
EvalReport exemplar_sweep(const diffusion::Backbone& backbone, const Scenario& scenario,
                          std::span<const int> m_with, const EvalConfig& config,
                          const corpus::TransformRegistry& registry = corpus::TransformRegistry::defaults());

/// The Lego cell next to a control that fills the concept slot with an
/// untrained random pseudo-token (scaled to the mean ordinary row norm).
EvalReport cardinality_experiment(const diffusion::Backbone& backbone, const Scenario& scenario,
                                  const EvalConfig& config,
                                  const corpus::TransformRegistry& registry = corpus::TransformRegistry::defaults());

}  // namespace lego::eval
