// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "lego/app/run_config.hpp"
#include "lego/core/error.hpp"
#include "lego/core/image.hpp"
#include "lego/corpus/dataset.hpp"
#include "lego/diffusion/backbone.hpp"
#include "lego/diffusion/sampler.hpp"
#include "lego/diffusion/trainer.hpp"
#include "lego/eval/harness.hpp"
#include "lego/eval/metrics.hpp"
#include "lego/inversion/lego.hpp"

namespace fs = std::filesystem;
using namespace lego;

namespace {

void prepare_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
        if (!fs::is_empty(dir) && !force) throw IoError(dir.string() + " is not empty (use --force to overwrite)");
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

app::RunConfig config_or_default(const std::string& path) {
    return path.empty() ? app::RunConfig{} : app::load_run_config(path);
}

void require_file(const std::string& path, const char* what) {
    if (!fs::exists(path)) throw UserError(std::string(what) + " not found: " + path);
}

std::string neighbors_text(const inversion::TrainingLog& log, const core::Vocabulary& vocab) {
    std::string out;
    for (const auto& s : log.snapshots) {
        out += "step " + std::to_string(s.step) + " " + vocab.word(s.id) + "\n  top:";
        for (int id : s.neighbors.top) out += " " + vocab.word(id);
        out += "\n  bottom:";
        for (int id : s.neighbors.bottom) out += " " + vocab.word(id);
        out += "\n";
    }
    return out;
}

struct LoadedConcept {
    inversion::LearnedConcept learned;
    std::optional<inversion::LearnedSubject> subject;
};

LoadedConcept load_concept_dir(const fs::path& dir) {
    if (!fs::exists(dir / "concept.json")) throw UserError("no concept.json in " + dir.string());
    auto [c, s] = inversion::load_concept(dir);
    return {std::move(c), std::move(s)};
}

// Moves colliding pseudo ids to free band slots.
int take_free(std::set<int>& used, const core::IdRange& band) {
    for (int id = band.begin; id < band.end; ++id) {
        if (used.insert(id).second) return id;
    }
    throw UserError("not enough pseudo slots for the requested composition");
}

int cmd_make_corpus(const std::string& config_path, const std::string& out, bool force) {
    const app::RunConfig cfg = config_or_default(config_path);
    const auto vocab = core::Vocabulary::build(
        cfg.backbone.words.empty() ? core::default_word_list() : cfg.backbone.words, cfg.backbone.pseudo_count);
    const auto manifest = corpus::build_pretraining_corpus(cfg.corpus, vocab);
    prepare_dir(out, force);
    corpus::write_corpus(manifest, out);
    write_text(fs::path(out) / "corpus_config.json", cfg.corpus.to_json().dump(2) + "\n");
    std::cout << "wrote " << manifest.size() << " images to " << out << "\n";
    return 0;
}

int cmd_make_exemplars(const std::string& config_path, const std::string& out, int m_with, int m_without,
                       std::optional<std::uint64_t> seed, bool force) {
    const app::RunConfig cfg = app::load_run_config(config_path);
    const auto& s = cfg.require_scenario();
    const auto& transform = corpus::TransformRegistry::defaults().get(s.transform);
    const auto set = corpus::make_exemplars(s.subject, transform, m_with > 0 ? m_with : cfg.evaluation.m_with,
                                            m_without > 0 ? m_without : cfg.evaluation.m_without,
                                            derive_seed(seed.value_or(cfg.evaluation.seed), "exemplars"), s.spec.n);
    prepare_dir(out, force);
    app::write_exemplars(set, out);
    std::cout << "wrote " << set.with_concept.size() << " + " << set.without_concept.size() << " exemplars to "
              << out << "\n";
    return 0;
}

int cmd_train(const std::string& corpus_dir, const std::string& out, const std::string& config_path,
              const std::string& resume, std::optional<int> steps) {
    if (!fs::exists(fs::path(corpus_dir) / "manifest.jsonl")) throw UserError("no corpus manifest in " + corpus_dir);
    app::RunConfig cfg = config_or_default(config_path);
    if (steps) cfg.backbone.steps = *steps;
    cfg.backbone.validate();
    const auto manifest = corpus::read_corpus(corpus_dir);
    auto log = [](const diffusion::TrainLogEntry& e) {
        std::cout << "step " << e.step << " loss " << e.loss << std::endl;
    };
    diffusion::Backbone b;
    if (!resume.empty()) {
        require_file(resume, "checkpoint");
        const diffusion::Backbone start = diffusion::load_checkpoint(resume);
        b = diffusion::train_backbone(app::captioned(manifest), cfg.backbone, log, &start);
    } else if (auto dir = app::cache_dir()) {
        bool trained = false;
        b = app::cached_backbone(manifest, cfg.backbone, *dir, log, &trained);
        if (!trained) std::cout << "loaded cached backbone from " << dir->string() << "\n";
    } else {
        b = diffusion::train_backbone(app::captioned(manifest), cfg.backbone, log);
    }
    diffusion::save_checkpoint(b, out);
    std::cout << "saved " << out << " (validation loss " << b.info.value("initial_validation_loss", 0.0) << " -> "
              << b.info.value("final_validation_loss", 0.0) << ")\n";
    return 0;
}

int cmd_invert(const std::string& ckpt, const std::string& exemplars, const std::string& spec_path,
               const std::string& config_path, const std::string& out, std::optional<double> lambda,
               std::optional<int> steps, std::optional<std::uint64_t> seed, bool no_ss, bool force) {
    require_file(ckpt, "checkpoint");
    app::RunConfig cfg = config_or_default(config_path);
    core::InversionConfig inv = cfg.evaluation.inversion;
    if (lambda) inv.lambda = *lambda;
    if (steps) inv.steps = *steps;
    if (seed) inv.seed = *seed;
    if (no_ss) inv.subject_separation = false;
    inv.validate();
    const auto backbone = diffusion::load_checkpoint(ckpt);
    const auto spec = app::load_spec(spec_path);
    spec.validate(backbone.vocab);
    const auto set = app::read_exemplars(exemplars);
    prepare_dir(out, force);
    const auto result = inversion::lego_optimize(set, spec, backbone, inv);
    inversion::save_concept(out, result.learned, result.subject);
    result.log.write_csv(fs::path(out) / "training_log.csv");
    write_text(fs::path(out) / "neighbors.txt", neighbors_text(result.log, backbone.vocab));
    const auto& last = result.log.rows.empty() ? inversion::LogRow{} : result.log.rows.back();
    std::cout << "inverted " << spec.n << " token(s); final total loss " << last.total << "\n";
    return 0;
}

int cmd_generate(const std::string& ckpt, const std::vector<std::string>& concept_dirs, const std::string& subject,
                 const std::string& template_text, std::uint64_t seed, int n, const std::string& out,
                 const std::string& config_path, bool force) {
    require_file(ckpt, "checkpoint");
    if (n < 1) throw UserError("--n must be >= 1");
    const app::RunConfig cfg = config_or_default(config_path);
    const auto backbone = diffusion::load_checkpoint(ckpt);
    core::EmbeddingTable table = backbone.table;
    const core::IdRange band = backbone.vocab.pseudo_band();
    std::set<int> used;
    std::vector<inversion::LearnedConcept> concepts;
    for (const auto& dir : concept_dirs) {
        LoadedConcept lc = load_concept_dir(dir);
        for (int& id : lc.learned.ids) {
            if (!band.contains(id)) throw UserError("concept id outside the checkpoint's pseudo band");
            if (!used.insert(id).second) id = take_free(used, band);
        }
        inversion::install(table, lc.learned, std::nullopt);
        concepts.push_back(std::move(lc.learned));
    }
    std::optional<inversion::LearnedSubject> learned_subject;
    std::string subject_words;
    if (fs::is_directory(subject)) {
        LoadedConcept lc = load_concept_dir(subject);
        if (!lc.subject) throw UserError(subject + " holds no learned subject");
        if (!used.insert(lc.subject->id).second) lc.subject->id = take_free(used, band);
        table.set_pseudo_row(lc.subject->id, lc.subject->vector);
        learned_subject = lc.subject;
    } else {
        subject_words = subject;
        backbone.vocab.tokenize(subject_words);
    }
    const core::PromptTemplate tmpl(template_text, core::TemplateKind::SubjectPlusConcept);
    const auto prompt = inversion::compose(concepts, learned_subject, subject_words, tmpl, backbone.vocab);
    prepare_dir(out, force);
    const auto seeds = eval::sample_seeds(seed, n);
    const auto images = eval::generate(backbone, table, prompt, seeds, cfg.evaluation.sampling);
    for (std::size_t i = 0; i < images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%05zu.png", i);
        core::write_png(images[i], fs::path(out) / name);
    }
    const nlohmann::json meta = {{"prompt", backbone.vocab.detokenize(prompt)},
                                 {"prompt_ids", prompt},
                                 {"seed", seed},
                                 {"seeds", seeds},
                                 {"sampling", cfg.evaluation.to_json().at("sampling")}};
    write_text(fs::path(out) / "generation.json", meta.dump(2) + "\n");
    std::cout << "wrote " << images.size() << " images for \"" << meta["prompt"].get<std::string>() << "\"\n";
    return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& concept_dir, const std::string& config_path,
                 const std::string& out, std::optional<int> n_samples, bool force) {
    require_file(ckpt, "checkpoint");
    app::RunConfig cfg = app::load_run_config(config_path);
    if (n_samples) cfg.evaluation.n_samples = *n_samples;
    cfg.evaluation.validate();
    const auto& s = cfg.require_scenario();
    const auto backbone = diffusion::load_checkpoint(ckpt);
    const auto& transform = corpus::TransformRegistry::defaults().get(s.transform);
    LoadedConcept lc = load_concept_dir(concept_dir);
    core::EmbeddingTable table = backbone.table;
    inversion::install(table, lc.learned, std::nullopt);
    const core::PromptTemplate tmpl(cfg.evaluation.generation_template, core::TemplateKind::SubjectPlusConcept);
    const auto prompt = inversion::compose(std::span<const inversion::LearnedConcept>(&lc.learned, 1), std::nullopt,
                                           s.target.phrase(), tmpl, backbone.vocab);
    eval::EvalReport rep;
    rep.kind = "evaluate";
    rep.scenario = s.to_json();
    rep.scenario["config_hash"] = cfg.hash();
    rep.seeds = eval::sample_seeds(cfg.evaluation.seed, cfg.evaluation.n_samples);
    const auto images = eval::generate(backbone, table, prompt, rep.seeds, cfg.evaluation.sampling);
    eval::CellResult r;
    r.name = "concept";
    r.prompt = backbone.vocab.detokenize(prompt);
    r.n_samples = static_cast<int>(images.size());
    r.concept_accuracy = eval::concept_accuracy(images, transform);
    r.subject_fidelity = eval::subject_fidelity(images, s.target);
    if (s.subject.color != s.target.color || s.subject.shape != s.target.shape) {
        r.leakage_score = eval::leakage_score(images, s.subject, s.target);
    }
    r.cardinality = eval::cardinality_histogram(images);
    if (transform.cardinality) r.count_accuracy = eval::count_accuracy(images, *transform.cardinality);
    rep.cells.push_back(r);
    prepare_dir(out, force);
    rep.write(out);
    std::cout << rep.to_csv();
    return 0;
}

std::vector<eval::AblationCell> parse_cells(const std::vector<std::string>& names) {
    std::vector<eval::AblationCell> cells;
    for (const auto& n : names) cells.push_back(eval::AblationCell::from_name(n));
    return cells;
}

int cmd_ablate(const std::string& ckpt, const std::string& config_path, const std::string& out,
               const std::vector<std::string>& cell_names, std::optional<int> n_samples, bool force) {
    require_file(ckpt, "checkpoint");
    app::RunConfig cfg = app::load_run_config(config_path);
    if (n_samples) cfg.evaluation.n_samples = *n_samples;
    if (!cell_names.empty()) cfg.cells = cell_names;
    cfg.evaluation.validate();
    const auto cells = parse_cells(cfg.cells);
    const auto backbone = diffusion::load_checkpoint(ckpt);
    prepare_dir(out, force);
    const auto rep = eval::run_ablation(backbone, cfg.require_scenario(), cells, cfg.evaluation);
    rep.write(out);
    write_text(fs::path(out) / "run_config.json", cfg.to_json().dump(2) + "\n");
    std::cout << rep.to_csv();
    return 0;
}

int cmd_sweep(const std::string& ckpt, const std::string& config_path, const std::string& out,
              const std::vector<int>& m_with, std::optional<int> n_samples, bool force) {
    require_file(ckpt, "checkpoint");
    app::RunConfig cfg = app::load_run_config(config_path);
    if (n_samples) cfg.evaluation.n_samples = *n_samples;
    if (!m_with.empty()) cfg.sweep_m_with = m_with;
    cfg.evaluation.validate();
    const auto backbone = diffusion::load_checkpoint(ckpt);
    prepare_dir(out, force);
    const auto rep = eval::exemplar_sweep(backbone, cfg.require_scenario(), cfg.sweep_m_with, cfg.evaluation);
    rep.write(out);
    write_text(fs::path(out) / "run_config.json", cfg.to_json().dump(2) + "\n");
    std::cout << rep.to_csv();
    return 0;
}

int cmd_neighbors(const std::string& ckpt, const std::string& concept_dir, int k) {
    require_file(ckpt, "checkpoint");
    const auto backbone = diffusion::load_checkpoint(ckpt);
    LoadedConcept lc = load_concept_dir(concept_dir);
    core::EmbeddingTable table = backbone.table;
    inversion::install(table, lc.learned, lc.subject);
    auto show = [&](int id) {
        const auto n = inversion::neighbor_report(table.row(id), table, backbone.vocab, k);
        std::cout << backbone.vocab.word(id) << "\n  top:";
        for (int w : n.top) std::cout << " " << backbone.vocab.word(w);
        std::cout << "\n  bottom:";
        for (int w : n.bottom) std::cout << " " << backbone.vocab.word(w);
        std::cout << "\n";
    };
    if (lc.subject) show(lc.subject->id);
    for (int id : lc.learned.ids) show(id);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"lego-lab: concept inversion on a toy text-to-image diffusion stack"};
    cli.require_subcommand(1);
    bool force = false;

    std::string config, out, corpus_dir, ckpt, resume, exemplars, spec, subject, template_text, concept_dir;
    std::optional<int> steps, n_samples;
    std::optional<double> lambda;
    std::optional<std::uint64_t> seed;
    std::uint64_t gen_seed = 0;
    int n = 1, m_with = 0, m_without = 0, k = 10;
    bool no_ss = false;
    std::vector<std::string> concept_dirs, cells;
    std::vector<int> sweep_m;

    auto* mc = cli.add_subcommand("make-corpus", "Render the pretraining corpus");
    mc->add_option("--config", config, "Run config (JSON)");
    mc->add_option("--out", out, "Output directory")->required();
    mc->add_flag("--force", force, "Overwrite a non-empty output directory");

    auto* me = cli.add_subcommand("make-exemplars", "Render the scenario's exemplar set");
    me->add_option("--config", config, "Run config with a scenario section")->required();
    me->add_option("--out", out, "Output directory")->required();
    me->add_option("--m-with", m_with, "Images with the concept");
    me->add_option("--m-without", m_without, "Images without the concept");
    me->add_option("--seed", seed, "Root seed");
    me->add_flag("--force", force, "Overwrite a non-empty output directory");

    auto* tb = cli.add_subcommand("train-backbone", "Pretrain the diffusion backbone");
    tb->add_option("--corpus", corpus_dir, "Corpus directory")->required();
    tb->add_option("--out", out, "Checkpoint path")->required();
    tb->add_option("--config", config, "Run config (JSON)");
    tb->add_option("--resume", resume, "Continue from a checkpoint");
    tb->add_option("--steps", steps, "Override backbone.steps");

    auto* iv = cli.add_subcommand("invert", "Learn subject and concept embeddings");
    iv->add_option("--ckpt", ckpt, "Backbone checkpoint")->required();
    iv->add_option("--exemplars", exemplars, "Exemplar directory")->required();
    iv->add_option("--spec", spec, "Concept spec (JSON)")->required();
    iv->add_option("--config", config, "Run config (JSON)");
    iv->add_option("--out", out, "Concept directory")->required();
    iv->add_option("--lambda", lambda, "Context-loss weight");
    iv->add_option("--steps", steps, "Optimizer steps");
    iv->add_option("--seed", seed, "Inversion seed");
    iv->add_flag("--no-subject-separation", no_ss, "Disable the subject token");
    iv->add_flag("--force", force, "Overwrite a non-empty output directory");

    auto* gen = cli.add_subcommand("generate", "Sample images from learned concepts");
    gen->add_option("--ckpt", ckpt, "Backbone checkpoint")->required();
    gen->add_option("--concept", concept_dirs, "Concept directories (composed in order)")->required();
    gen->add_option("--subject", subject, "Subject words or a concept directory with a learned subject")->required();
    gen->add_option("--template", template_text, "Prompt template")->required();
    gen->add_option("--seed", gen_seed, "Root seed");
    gen->add_option("--n", n, "Number of images");
    gen->add_option("--config", config, "Run config (sampling section)");
    gen->add_option("--out", out, "Output directory")->required();
    gen->add_flag("--force", force, "Overwrite a non-empty output directory");

    auto* ev = cli.add_subcommand("evaluate", "Score a learned concept on the scenario's target subject");
    ev->add_option("--ckpt", ckpt, "Backbone checkpoint")->required();
    ev->add_option("--concept", concept_dir, "Concept directory")->required();
    ev->add_option("--config", config, "Run config with a scenario section")->required();
    ev->add_option("--out", out, "Report directory")->required();
    ev->add_option("--n-samples", n_samples, "Images to generate");
    ev->add_flag("--force", force, "Overwrite a non-empty output directory");

    auto* ab = cli.add_subcommand("ablate", "Run the subject-separation x context-loss ablation");
    ab->add_option("--ckpt", ckpt, "Backbone checkpoint")->required();
    ab->add_option("--config", config, "Run config with a scenario section")->required();
    ab->add_option("--out", out, "Report directory")->required();
    ab->add_option("--cells", cells, "Subset of lego, ss-only, reversion-like, ti-like")->delimiter(',');
    ab->add_option("--n-samples", n_samples, "Images per cell");
    ab->add_flag("--force", force, "Overwrite a non-empty output directory");

    auto* sw = cli.add_subcommand("sweep", "Vary the number of concept exemplars");
    sw->add_option("--ckpt", ckpt, "Backbone checkpoint")->required();
    sw->add_option("--config", config, "Run config with a scenario section")->required();
    sw->add_option("--out", out, "Report directory")->required();
    sw->add_option("--m-with", sweep_m, "Exemplar counts")->delimiter(',');
    sw->add_option("--n-samples", n_samples, "Images per row");
    sw->add_flag("--force", force, "Overwrite a non-empty output directory");

    auto* nb = cli.add_subcommand("neighbors", "Most and least similar words of learned embeddings");
    nb->add_option("--ckpt", ckpt, "Backbone checkpoint")->required();
    nb->add_option("--concept", concept_dir, "Concept directory")->required();
    nb->add_option("--k", k, "Words per list");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*mc) return cmd_make_corpus(config, out, force);
        if (*me) return cmd_make_exemplars(config, out, m_with, m_without, seed, force);
        if (*tb) return cmd_train(corpus_dir, out, config, resume, steps);
        if (*iv) return cmd_invert(ckpt, exemplars, spec, config, out, lambda, steps, seed, no_ss, force);
        if (*gen) return cmd_generate(ckpt, concept_dirs, subject, template_text, gen_seed, n, out, config, force);
        if (*ev) return cmd_evaluate(ckpt, concept_dir, config, out, n_samples, force);
        if (*ab) return cmd_ablate(ckpt, config, out, cells, n_samples, force);
        if (*sw) return cmd_sweep(ckpt, config, out, sweep_m, n_samples, force);
        if (*nb) return cmd_neighbors(ckpt, concept_dir, k);
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
