// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/eval/harness.hpp"

#include <fstream>
#include <sstream>

#include "lego/core/config.hpp"
#include "lego/core/error.hpp"
#include "lego/core/hash.hpp"
#include "lego/corpus/dataset.hpp"
#include "lego/eval/metrics.hpp"
#include "lego/inversion/lego.hpp"

namespace lego::eval {

std::string AblationCell::name() const {
    if (subject_separation) return context_loss ? "lego" : "ss-only";
    return context_loss ? "reversion-like" : "ti-like";
}

AblationCell AblationCell::from_name(const std::string& name) {
    for (const auto& c : all()) {
        if (c.name() == name) return c;
    }
    throw UserError("unknown ablation cell '" + name + "' (expected lego, ss-only, reversion-like, ti-like)");
}

std::vector<AblationCell> AblationCell::all() { return {{true, true}, {true, false}, {false, true}, {false, false}}; }

void EvalConfig::validate() const {
    inversion.validate();
    if (n_samples < 1) throw UserError("evaluation: n_samples must be >= 1");
    if (m_with < 1 || m_without < 1) throw UserError("evaluation: m_with and m_without must be >= 1");
    if (sampling.steps < 1) throw UserError("evaluation: sampling steps must be >= 1");
    if (!(sampling.guidance_scale >= 0.0)) throw UserError("evaluation: guidance_scale must be >= 0");
    core::PromptTemplate(generation_template, core::TemplateKind::SubjectPlusConcept);
}

nlohmann::json EvalConfig::to_json() const {
    return {{"inversion", inversion.to_json()},
            {"sampling",
             {{"steps", sampling.steps}, {"guidance_scale", sampling.guidance_scale},
              {"sampler", diffusion::to_string(sampling.kind)}}},
            {"n_samples", n_samples},
            {"seed", seed},
            {"m_with", m_with},
            {"m_without", m_without},
            {"generation_template", generation_template}};
}

EvalConfig EvalConfig::from_json(const nlohmann::json& j) {
    core::reject_unknown_keys(j, {"inversion", "sampling", "n_samples", "seed", "m_with", "m_without",
                                  "generation_template"},
                              "evaluation");
    EvalConfig c;
    try {
        if (j.contains("inversion")) c.inversion = core::InversionConfig::from_json(j.at("inversion"));
        if (j.contains("sampling")) {
            const auto& s = j.at("sampling");
            core::reject_unknown_keys(s, {"steps", "guidance_scale", "sampler"}, "evaluation.sampling");
            c.sampling.steps = s.value("steps", c.sampling.steps);
            c.sampling.guidance_scale = s.value("guidance_scale", c.sampling.guidance_scale);
            if (s.contains("sampler")) c.sampling.kind = diffusion::sampler_from_string(s.at("sampler").get<std::string>());
        }
        c.n_samples = j.value("n_samples", c.n_samples);
        c.seed = j.value("seed", c.seed);
        c.m_with = j.value("m_with", c.m_with);
        c.m_without = j.value("m_without", c.m_without);
        c.generation_template = j.value("generation_template", c.generation_template);
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("evaluation: ") + e.what());
    }
    c.validate();
    return c;
}

std::string EvalConfig::hash() const { return hash_hex(to_json().dump()); }

std::vector<std::uint64_t> sample_seeds(std::uint64_t root, int n) {
    std::vector<std::uint64_t> seeds;
    const std::uint64_t base = derive_seed(root, "sample");
    for (int i = 0; i < n; ++i) seeds.push_back(derive_seed(base, static_cast<std::uint64_t>(i)));
    return seeds;
}

std::vector<core::Image> generate(const diffusion::Backbone& backbone, const core::EmbeddingTable& table,
                                  std::span<const int> prompt, std::span<const std::uint64_t> seeds,
                                  const diffusion::SampleOptions& options) {
    std::vector<core::Image> out;
    out.reserve(seeds.size());
    for (std::uint64_t s : seeds) {
        diffusion::SampleOptions o = options;
        o.seed = s;
        core::Image img = diffusion::sample(prompt, backbone, table, o);
        img.quantize();
        out.push_back(std::move(img));
    }
    return out;
}

const CellResult& EvalReport::cell(const std::string& name) const {
    for (const auto& c : cells) {
        if (c.name == name) return c;
    }
    throw UserError("report has no cell '" + name + "'");
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json card = nlohmann::json::object();
        for (const auto& [k, v] : c.cardinality) card[std::to_string(k)] = v;
        nlohmann::json j = {{"name", c.name},
                            {"subject_separation", c.cell.subject_separation},
                            {"context_loss", c.cell.context_loss},
                            {"m_with", c.m_with},
                            {"failed", c.failed},
                            {"error", c.error},
                            {"concept_accuracy", c.concept_accuracy},
                            {"subject_fidelity", c.subject_fidelity},
                            {"leakage_score", c.leakage_score},
                            {"cardinality", card},
                            {"n_samples", c.n_samples},
                            {"prompt", c.prompt},
                            {"embedding_hash", c.embedding_hash},
                            {"top_words", c.top_words},
                            {"final_losses", c.final_losses},
                            {"notes", c.notes}};
        j["count_accuracy"] = c.count_accuracy ? nlohmann::json(*c.count_accuracy) : nlohmann::json(nullptr);
        arr.push_back(j);
    }
    return {{"kind", kind}, {"scenario", scenario}, {"seeds", seeds}, {"cells", arr}};
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out.precision(6);
    out << "cell,subject_separation,context_loss,m_with,failed,concept_accuracy,subject_fidelity,leakage_score,"
           "count_accuracy,n_samples\n";
    for (const auto& c : cells) {
        out << c.name << ',' << c.cell.subject_separation << ',' << c.cell.context_loss << ',' << c.m_with << ','
            << c.failed << ',' << c.concept_accuracy << ',' << c.subject_fidelity << ',' << c.leakage_score << ',';
        if (c.count_accuracy) out << *c.count_accuracy;
        out << ',' << c.n_samples << '\n';
    }
    return out.str();
}

void EvalReport::write(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::ofstream j(dir / "report.json");
    std::ofstream c(dir / "report.csv");
    if (!j || !c) throw IoError("cannot write report files in " + dir.string());
    j << to_json().dump(2) << '\n';
    c << to_csv();
    if (!j || !c) throw IoError("write failed in " + dir.string());
}

nlohmann::json Scenario::to_json() const {
    return {{"subject", subject.to_json()}, {"transform", transform}, {"target", target.to_json()},
            {"spec", spec.to_json()}};
}

namespace {

std::string vector_hash(const Eigen::MatrixXd& m) {
    Fnv64 h;
    h.update(m);
    return h.hex();
}

void score(CellResult& r, std::span<const core::Image> images, const Scenario& s,
           const corpus::ConceptTransform& transform) {
    r.n_samples = static_cast<int>(images.size());
    r.concept_accuracy = concept_accuracy(images, transform);
    r.subject_fidelity = subject_fidelity(images, s.target);
    if (s.subject.color != s.target.color || s.subject.shape != s.target.shape) {
        r.leakage_score = leakage_score(images, s.subject, s.target);
    }
    r.cardinality = cardinality_histogram(images);
    if (transform.cardinality) r.count_accuracy = count_accuracy(images, *transform.cardinality);
}

CellResult run_cell(const diffusion::Backbone& backbone, const Scenario& s, const AblationCell& cell, int m_with,
                    const EvalConfig& config, const corpus::ConceptTransform& transform,
                    std::span<const std::uint64_t> seeds) {
    CellResult r;
    r.cell = cell;
    r.name = cell.name();
    r.m_with = m_with;
    try {
        const core::ExemplarSet ex = corpus::make_exemplars(s.subject, transform, m_with, config.m_without,
                                                            derive_seed(config.seed, "exemplars"), s.spec.n);
        core::InversionConfig inv = config.inversion;
        inv.subject_separation = cell.subject_separation;
        if (!cell.context_loss) inv.lambda = 0.0;
        const inversion::LegoResult res = inversion::lego_optimize(ex, s.spec, backbone, inv);
        const core::PromptTemplate tmpl(config.generation_template, core::TemplateKind::SubjectPlusConcept);
        const auto prompt = inversion::compose(std::span<const inversion::LearnedConcept>(&res.learned, 1),
                                               std::nullopt, s.target.phrase(), tmpl, backbone.vocab);
        r.prompt = backbone.vocab.detokenize(prompt);
        r.embedding_hash = vector_hash(res.learned.vectors);
        const auto n = inversion::neighbor_report(res.learned.vectors.col(0), res.table, backbone.vocab,
                                                  config.inversion.neighbor_k);
        for (int id : n.top) r.top_words.push_back(backbone.vocab.word(id));
        const auto& last = res.log.rows.empty() ? inversion::LogRow{} : res.log.rows.back();
        r.final_losses = {{"L_inv_subjectonly", last.inv_subject_only},
                          {"L_inv_concept", last.inv_concept},
                          {"L_context", last.context},
                          {"total", last.total}};
        const auto images = generate(backbone, res.table, prompt, seeds, config.sampling);
        score(r, images, s, transform);
    } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
    }
    return r;
}

EvalReport make_report(const std::string& kind, const Scenario& s, const EvalConfig& config) {
    config.validate();
    EvalReport rep;
    rep.kind = kind;
    rep.seeds = sample_seeds(config.seed, config.n_samples);
    rep.scenario = s.to_json();
    rep.scenario["config"] = config.to_json();
    rep.scenario["config_hash"] = config.hash();
    return rep;
}

}  // namespace

EvalReport run_ablation(const diffusion::Backbone& backbone, const Scenario& scenario,
                        std::span<const AblationCell> cells, const EvalConfig& config,
                        const corpus::TransformRegistry& registry) {
    if (cells.empty()) throw UserError("ablation needs at least one cell");
    const auto& transform = registry.get(scenario.transform);
    leakage_signature(scenario.subject, scenario.target);
    EvalReport rep = make_report("ablation", scenario, config);
    rep.scenario["backbone_hash"] = backbone.frozen_hash();
    for (const auto& cell : cells) {
        rep.cells.push_back(run_cell(backbone, scenario, cell, config.m_with, config, transform, rep.seeds));
    }
    return rep;
}

EvalReport exemplar_sweep(const diffusion::Backbone& backbone, const Scenario& scenario,
                          std::span<const int> m_with, const EvalConfig& config,
                          const corpus::TransformRegistry& registry) {
    if (m_with.empty()) throw UserError("sweep needs at least one exemplar count");
    const auto& transform = registry.get(scenario.transform);
    leakage_signature(scenario.subject, scenario.target);
    EvalReport rep = make_report("sweep", scenario, config);
    rep.scenario["backbone_hash"] = backbone.frozen_hash();
    for (int m : m_with) {
        if (m < 1) throw UserError("sweep exemplar counts must be >= 1");
        CellResult r = run_cell(backbone, scenario, {true, true}, m, config, transform, rep.seeds);
        r.name = "lego-m" + std::to_string(m);
        if (m < 2) r.notes.push_back("fewer concept exemplars than the two-image minimum used by the method");
        rep.cells.push_back(std::move(r));
    }
    return rep;
}

EvalReport cardinality_experiment(const diffusion::Backbone& backbone, const Scenario& scenario,
                                  const EvalConfig& config, const corpus::TransformRegistry& registry) {
    const auto& transform = registry.get(scenario.transform);
    if (!transform.cardinality) throw UserError("transform '" + scenario.transform + "' has no cardinality");
    EvalReport rep = make_report("cardinality", scenario, config);
    rep.scenario["backbone_hash"] = backbone.frozen_hash();
    rep.cells.push_back(run_cell(backbone, scenario, {true, true}, config.m_with, config, transform, rep.seeds));

    CellResult control;
    control.name = "random-token";
    control.cell = {false, false};
    try {
        const inversion::PseudoAssignment ids = inversion::assign_pseudo_ids(scenario.spec, backbone.vocab);
        core::EmbeddingTable table = backbone.table;
        const int ordinary = backbone.vocab.ordinary_count();
        const double mean_norm = table.matrix().leftCols(ordinary).colwise().norm().mean();
        Rng rng(derive_seed(config.seed, "control"));
        inversion::LearnedConcept lc;
        lc.ids = ids.tokens;
        lc.vectors.resize(table.dim(), scenario.spec.n);
        for (int i = 0; i < scenario.spec.n; ++i) {
            Eigen::VectorXd v(table.dim());
            for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = rng.normal();
            v *= mean_norm / v.norm();
            lc.vectors.col(i) = v;
            table.set_pseudo_row(ids.tokens[static_cast<std::size_t>(i)], v);
        }
        const core::PromptTemplate tmpl(config.generation_template, core::TemplateKind::SubjectPlusConcept);
        const auto prompt = inversion::compose(std::span<const inversion::LearnedConcept>(&lc, 1), std::nullopt,
                                               scenario.target.phrase(), tmpl, backbone.vocab);
        control.prompt = backbone.vocab.detokenize(prompt);
        control.embedding_hash = vector_hash(lc.vectors);
        const auto images = generate(backbone, table, prompt, rep.seeds, config.sampling);
        score(control, images, scenario, transform);
    } catch (const std::exception& e) {
        control.failed = true;
        control.error = e.what();
    }
    rep.cells.push_back(std::move(control));
    return rep;
}

}  // namespace lego::eval
