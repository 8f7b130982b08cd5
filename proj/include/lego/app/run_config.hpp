// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lego/core/concept.hpp"
#include "lego/corpus/dataset.hpp"
#include "lego/diffusion/trainer.hpp"
#include "lego/eval/harness.hpp"

namespace lego::app {

/// One JSON document driving every command. Sections:
///   corpus, backbone, inversion, sampling,
///   evaluation {n_samples, seed, m_with, m_without, generation_template, cells, sweep_m_with},
///   scenario {subject, transform, target, spec}.
/// Every section is optional; unknown keys are rejected at every level.
struct RunConfig {
    corpus::CorpusConfig corpus;
    diffusion::BackboneConfig backbone;
    eval::EvalConfig evaluation;
    std::vector<std::string> cells{"lego", "ss-only", "reversion-like", "ti-like"};
    std::vector<int> sweep_m_with{2, 4, 8};
    std::optional<eval::Scenario> scenario;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    std::string hash() const;

    const eval::Scenario& require_scenario() const;
};

/// IoError when unreadable, UserError on malformed JSON or schema violations.
nlohmann::json read_json(const std::filesystem::path& path);
RunConfig load_run_config(const std::filesystem::path& path);
core::ConceptSpec load_spec(const std::filesystem::path& path);

eval::Scenario scenario_from_json(const nlohmann::json& j);

/// `dir/exemplars.json` plus one PNG per exemplar.
void write_exemplars(const core::ExemplarSet& set, const std::filesystem::path& dir);
core::ExemplarSet read_exemplars(const std::filesystem::path& dir);

/// Directory from LEGO_LAB_CACHE, if set.
std::optional<std::filesystem::path> cache_dir();

/// Cache key for a backbone trained on `corpus` under `config`.
std::string backbone_key(const corpus::CorpusManifest& corpus, const diffusion::BackboneConfig& config);

/// Loads `dir/backbone-<key>.bin` when present; otherwise trains and stores
/// it there. `trained` reports which path was taken.
diffusion::Backbone cached_backbone(const corpus::CorpusManifest& corpus, const diffusion::BackboneConfig& config,
                                    const std::filesystem::path& dir,
                                    const std::function<void(const diffusion::TrainLogEntry&)>& on_log = {},
                                    bool* trained = nullptr);

std::vector<diffusion::CaptionedImage> captioned(const corpus::CorpusManifest& corpus);

}  // namespace lego::app
