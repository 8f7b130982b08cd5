// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/app/run_config.hpp"

#include <cstdlib>
#include <fstream>

#include "lego/core/config.hpp"
#include "lego/core/error.hpp"
#include "lego/core/hash.hpp"
#include "lego/core/image.hpp"

namespace lego::app {

eval::Scenario scenario_from_json(const nlohmann::json& j) {
    core::reject_unknown_keys(j, {"subject", "transform", "target", "spec"}, "scenario");
    eval::Scenario s;
    try {
        s.subject = corpus::SubjectParams::from_json(j.at("subject"));
        s.transform = j.at("transform").get<std::string>();
        s.target = corpus::SubjectParams::from_json(j.at("target"));
        s.spec = core::ConceptSpec::from_json(j.at("spec"));
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("scenario: ") + e.what());
    }
    s.subject.validate();
    s.target.validate();
    return s;
}

nlohmann::json RunConfig::to_json() const {
    const nlohmann::json ev = evaluation.to_json();
    nlohmann::json j = {{"corpus", corpus.to_json()},
                        {"backbone", backbone.to_json()},
                        {"inversion", ev.at("inversion")},
                        {"sampling", ev.at("sampling")},
                        {"evaluation",
                         {{"n_samples", evaluation.n_samples},
                          {"seed", evaluation.seed},
                          {"m_with", evaluation.m_with},
                          {"m_without", evaluation.m_without},
                          {"generation_template", evaluation.generation_template},
                          {"cells", cells},
                          {"sweep_m_with", sweep_m_with}}}};
    if (scenario) {
        nlohmann::json spec = scenario->spec.to_json();
        spec.erase("pseudo_ids");
        if (spec.at("subject_init_word").is_null()) spec.erase("subject_init_word");
        j["scenario"] = {{"subject", scenario->subject.to_json()},
                         {"transform", scenario->transform},
                         {"target", scenario->target.to_json()},
                         {"spec", spec}};
    }
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UserError("run config must be a JSON object");
    core::reject_unknown_keys(j, {"corpus", "backbone", "inversion", "sampling", "evaluation", "scenario"}, "config");
    RunConfig c;
    if (j.contains("corpus")) c.corpus = corpus::CorpusConfig::from_json(j.at("corpus"));
    if (j.contains("backbone")) c.backbone = diffusion::BackboneConfig::from_json(j.at("backbone"));
    nlohmann::json ev = nlohmann::json::object();
    if (j.contains("inversion")) ev["inversion"] = j.at("inversion");
    if (j.contains("sampling")) ev["sampling"] = j.at("sampling");
    if (j.contains("evaluation")) {
        const auto& e = j.at("evaluation");
        core::reject_unknown_keys(e, {"n_samples", "seed", "m_with", "m_without", "generation_template", "cells",
                                      "sweep_m_with"},
                                  "evaluation");
        for (const char* key : {"n_samples", "seed", "m_with", "m_without", "generation_template"}) {
            if (e.contains(key)) ev[key] = e.at(key);
        }
        try {
            c.cells = e.value("cells", c.cells);
            c.sweep_m_with = e.value("sweep_m_with", c.sweep_m_with);
        } catch (const nlohmann::json::exception& ex) {
            throw UserError(std::string("evaluation: ") + ex.what());
        }
    }
    c.evaluation = eval::EvalConfig::from_json(ev);
    for (const auto& name : c.cells) eval::AblationCell::from_name(name);
    if (j.contains("scenario")) c.scenario = scenario_from_json(j.at("scenario"));
    return c;
}

std::string RunConfig::hash() const { return hash_hex(to_json().dump()); }

const eval::Scenario& RunConfig::require_scenario() const {
    if (!scenario) throw UserError("config has no scenario section");
    return *scenario;
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UserError(path.string() + ": " + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path) { return RunConfig::from_json(read_json(path)); }

core::ConceptSpec load_spec(const std::filesystem::path& path) { return core::ConceptSpec::from_json(read_json(path)); }

void write_exemplars(const core::ExemplarSet& set, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    nlohmann::json with = nlohmann::json::array();
    nlohmann::json without = nlohmann::json::array();
    for (std::size_t i = 0; i < set.with_concept.size(); ++i) {
        const std::string name = "with_" + std::to_string(i) + ".png";
        core::write_png(set.with_concept[i].image, dir / name);
        with.push_back({{"path", name}, {"template_id", set.with_concept[i].template_id}});
    }
    for (std::size_t i = 0; i < set.without_concept.size(); ++i) {
        const std::string name = "without_" + std::to_string(i) + ".png";
        core::write_png(set.without_concept[i].image, dir / name);
        without.push_back({{"path", name}, {"template_id", set.without_concept[i].template_id}});
    }
    const nlohmann::json j = {{"subject", set.subject_name},
                              {"with_concept", with},
                              {"without_concept", without},
                              {"templates", set.templates.to_json().at("templates")}};
    std::ofstream out(dir / "exemplars.json");
    if (!out) throw IoError("cannot write " + (dir / "exemplars.json").string());
    out << j.dump(2) << '\n';
}

core::ExemplarSet read_exemplars(const std::filesystem::path& dir) {
    const nlohmann::json j = read_json(dir / "exemplars.json");
    core::reject_unknown_keys(j, {"subject", "with_concept", "without_concept", "templates"}, "exemplars.json");
    core::ExemplarSet set;
    try {
        set.subject_name = j.at("subject").get<std::string>();
        set.templates = core::TemplateLibrary::from_json({{"templates", j.at("templates")}});
        for (const auto& e : j.at("with_concept")) {
            set.with_concept.push_back(
                {core::read_png(dir / e.at("path").get<std::string>()), e.at("template_id").get<int>()});
        }
        for (const auto& e : j.at("without_concept")) {
            set.without_concept.push_back(
                {core::read_png(dir / e.at("path").get<std::string>()), e.at("template_id").get<int>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("exemplars.json: ") + e.what());
    }
    set.validate();
    return set;
}

std::optional<std::filesystem::path> cache_dir() {
    const char* v = std::getenv("LEGO_LAB_CACHE");
    if (!v || !*v) return std::nullopt;
    return std::filesystem::path(v);
}

std::string backbone_key(const corpus::CorpusManifest& corpus, const diffusion::BackboneConfig& config) {
    Fnv64 h;
    h.update(config.to_json().dump());
    for (const auto& r : corpus) {
        h.update(r.caption);
        h.update(r.image.data());
    }
    return h.hex();
}

std::vector<diffusion::CaptionedImage> captioned(const corpus::CorpusManifest& corpus) {
    std::vector<diffusion::CaptionedImage> out;
    out.reserve(corpus.size());
    for (const auto& r : corpus) out.push_back({r.image, r.caption});
    return out;
}

diffusion::Backbone cached_backbone(const corpus::CorpusManifest& corpus, const diffusion::BackboneConfig& config,
                                    const std::filesystem::path& dir,
                                    const std::function<void(const diffusion::TrainLogEntry&)>& on_log,
                                    bool* trained) {
    const auto path = dir / ("backbone-" + backbone_key(corpus, config) + ".bin");
    if (std::filesystem::exists(path)) {
        if (trained) *trained = false;
        return diffusion::load_checkpoint(path);
    }
    const auto data = captioned(corpus);
    diffusion::Backbone b = diffusion::train_backbone(data, config, on_log);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const auto tmp = path.string() + ".tmp";
    diffusion::save_checkpoint(b, tmp);
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
    if (trained) *trained = true;
    return b;
}

}  // namespace lego::app
