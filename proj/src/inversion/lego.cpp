// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/inversion/lego.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "lego/core/error.hpp"
#include "lego/core/hash.hpp"

namespace lego::inversion {

double inversion_loss(const InversionBatch& batch, const diffusion::Backbone& backbone,
                      const core::EmbeddingTable& table, std::span<const int> grad_targets, MatrixXd* grad) {
    if (grad) {
        const std::set<int> targets(grad_targets.begin(), grad_targets.end());
        for (int id : targets) {
            if (!table.trainable(id)) throw UserError("gradient target " + std::to_string(id) + " is not a pseudo row");
        }
        for (const auto& p : batch.prompts) {
            for (int id : p) {
                if (backbone.vocab.is_pseudo(id) && !targets.count(id)) {
                    throw UserError("prompt uses pseudo id " + std::to_string(id) + " outside the gradient targets");
                }
            }
        }
        MatrixXd full = MatrixXd::Zero(table.dim(), table.size());
        diffusion::LossGrads lg;
        lg.embeddings = &full;
        const double loss = diffusion::ldm_loss(backbone, table, batch.x0, batch.prompts, batch.draw, &lg);
        *grad = MatrixXd::Zero(table.dim(), table.size());
        for (int id : targets) grad->col(id) = full.col(id);
        return loss;
    }
    return diffusion::ldm_loss(backbone, table, batch.x0, batch.prompts, batch.draw);
}

std::string TrainingLog::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "step,L_inv_subjectonly,L_inv_concept,L_context,total\n";
    for (const auto& r : rows) {
        out << r.step << ',' << r.inv_subject_only << ',' << r.inv_concept << ',' << r.context << ',' << r.total << '\n';
    }
    return out.str();
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_csv();
    if (!out) throw IoError("write failed for " + path.string());
}

PseudoAssignment assign_pseudo_ids(const core::ConceptSpec& spec, const core::Vocabulary& vocab) {
    const core::IdRange band = vocab.pseudo_band();
    PseudoAssignment a;
    if (!spec.pseudo_ids.empty()) {
        a.tokens = spec.pseudo_ids;
    } else {
        if (band.size() < spec.n + 1) throw UserError("pseudo band too small for subject plus concept tokens");
        for (int i = 0; i < spec.n; ++i) a.tokens.push_back(band.begin + 1 + i);
    }
    for (int id = band.begin; id < band.end; ++id) {
        if (std::find(a.tokens.begin(), a.tokens.end(), id) == a.tokens.end()) {
            a.subject = id;
            return a;
        }
    }
    throw UserError("no free pseudo id left for the subject");
}

namespace {

struct Slot {
    int id;
    VectorXd velocity;
};

InversionBatch draw_batch(const std::vector<core::Exemplar>& pool, const std::vector<core::PromptTemplate>& templates,
                          std::span<const int> subject, std::span<const int> cpt, const diffusion::Backbone& b,
                          int size, Rng& rng) {
    std::vector<core::Image> images;
    InversionBatch batch;
    for (int k = 0; k < size; ++k) {
        const auto& ex = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
        const auto& tmpl = templates[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(templates.size()) - 1))];
        images.push_back(ex.image);
        batch.prompts.push_back(core::render_template(tmpl, b.vocab, subject, cpt));
    }
    batch.x0 = diffusion::to_feature_map(images);
    batch.draw = diffusion::draw_noise(batch.x0, b.schedule, rng);
    return batch;
}

}  // namespace

LegoResult lego_optimize(const core::ExemplarSet& exemplars, const core::ConceptSpec& spec,
                         const diffusion::Backbone& backbone, const core::InversionConfig& config,
                         const core::EmbeddingTable* table_in) {
    config.validate();
    exemplars.validate();
    spec.validate(backbone.vocab);
    const core::EmbeddingTable& base = table_in ? *table_in : backbone.table;
    if (base.size() != backbone.vocab.size() || base.dim() != backbone.table.dim()) {
        throw UserError("embedding table does not match the backbone vocabulary");
    }
    const PseudoAssignment ids = assign_pseudo_ids(spec, backbone.vocab);
    const bool ss = config.subject_separation;
    for (const auto& t : exemplars.templates.with_concept) {
        if (t.concept_arity() != spec.n) {
            throw UserError("template '" + t.text() + "' does not take " + std::to_string(spec.n) + " concept tokens");
        }
    }

    LegoResult result;
    result.table = base;
    core::EmbeddingTable& table = result.table;
    const ContextSets sets = ContextSets::from_spec(spec, backbone.vocab, base);

    Rng rng(derive_seed(config.seed, "invert"));
    if (ss) {
        VectorXd init;
        if (spec.subject_init_word) {
            init = base.row(backbone.vocab.id(*spec.subject_init_word));
        } else {
            init.resize(base.dim());
            for (Eigen::Index i = 0; i < init.size(); ++i) init(i) = rng.normal();
            init /= init.norm();
        }
        table.set_pseudo_row(ids.subject, init);
    }
    for (int i = 0; i < spec.n; ++i) {
        VectorXd init;
        if (config.lambda > 0.0) {
            init = sets.positives[static_cast<std::size_t>(i)].rowwise().mean();
        } else {
            init.resize(base.dim());
            for (Eigen::Index k = 0; k < init.size(); ++k) init(k) = rng.normal();
            init /= init.norm();
        }
        table.set_pseudo_row(ids.tokens[static_cast<std::size_t>(i)], init);
    }

    std::vector<core::PromptTemplate> concept_templates;
    for (const auto& t : exemplars.templates.with_concept) concept_templates.push_back(ss ? t : t.without_subject());
    const std::vector<int> subject_tokens = ss ? std::vector<int>{ids.subject} : std::vector<int>{};
    std::vector<int> targets = ids.tokens;
    if (ss) targets.push_back(ids.subject);
    std::vector<Slot> slots;
    for (int id : targets) slots.push_back({id, VectorXd::Zero(base.dim())});

    auto snapshot = [&](int step) {
        for (int id : targets) {
            result.log.snapshots.push_back({step, id, neighbor_report(table.row(id), table, backbone.vocab, config.neighbor_k)});
        }
    };
    snapshot(0);

    MatrixXd cpt(base.dim(), spec.n);
    for (int step = 1; step <= config.steps; ++step) {
        MatrixXd grad = MatrixXd::Zero(table.dim(), table.size());
        LogRow row;
        row.step = step;
        if (ss) {
            const InversionBatch sb = draw_batch(exemplars.without_concept, exemplars.templates.subject_only,
                                                 subject_tokens, {}, backbone, config.batch_size, rng);
            MatrixXd g;
            row.inv_subject_only = inversion_loss(sb, backbone, table, std::vector<int>{ids.subject}, &g);
            grad += config.subject_only_weight * g;
        }
        const InversionBatch cb = draw_batch(exemplars.with_concept, concept_templates, subject_tokens, ids.tokens,
                                             backbone, config.batch_size, rng);
        MatrixXd g;
        row.inv_concept = inversion_loss(cb, backbone, table, targets, &g);
        grad += g;
        for (int i = 0; i < spec.n; ++i) cpt.col(i) = table.row(ids.tokens[static_cast<std::size_t>(i)]);
        MatrixXd gctx;
        row.context = context_loss(cpt, sets, config.temperature, &gctx);
        row.total = config.subject_only_weight * row.inv_subject_only + row.inv_concept + config.lambda * row.context;
        if (!std::isfinite(row.total)) {
            throw NumericalError("lego_optimize: non-finite loss at step " + std::to_string(step));
        }
        for (int i = 0; i < spec.n; ++i) grad.col(ids.tokens[static_cast<std::size_t>(i)]) += config.lambda * gctx.col(i);
        for (auto& s : slots) {
            s.velocity = config.momentum * s.velocity + grad.col(s.id);
            table.set_pseudo_row(s.id, table.row(s.id) - config.learning_rate * s.velocity);
        }
        result.log.rows.push_back(row);
        if (config.neighbor_every > 0 && step % config.neighbor_every == 0) snapshot(step);
    }

    nlohmann::json provenance = {{"config_hash", config.hash()},
                                 {"config", config.to_json()},
                                 {"exemplar_subject", exemplars.subject_name},
                                 {"exemplars_with", exemplars.with_concept.size()},
                                 {"exemplars_without", exemplars.without_concept.size()},
                                 {"backbone_hash", backbone.frozen_hash()}};
    result.learned.ids = ids.tokens;
    result.learned.spec = spec;
    result.learned.spec.pseudo_ids = ids.tokens;
    result.learned.vectors.resize(base.dim(), spec.n);
    for (int i = 0; i < spec.n; ++i) result.learned.vectors.col(i) = table.row(ids.tokens[static_cast<std::size_t>(i)]);
    result.learned.provenance = provenance;
    if (ss) result.subject = LearnedSubject{ids.subject, table.row(ids.subject), provenance};
    return result;
}

Neighbors neighbor_report(const VectorXd& v, const core::EmbeddingTable& table, const core::Vocabulary& vocab,
                          int k) {
    const int count = vocab.ordinary_count();
    if (k < 0 || k > count) throw UserError("neighbor k must lie in [0, ordinary word count]");
    if (v.size() != table.dim()) throw UserError("neighbor vector has the wrong dimension");
    const VectorXd scores = table.matrix().leftCols(count).transpose() * v;
    std::vector<int> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });
    Neighbors n;
    n.top.assign(order.begin(), order.begin() + k);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) < scores(b); });
    n.bottom.assign(order.begin(), order.begin() + k);
    return n;
}

std::vector<double> context_descent(MatrixXd& cpt, const ContextSets& sets, int steps, double learning_rate,
                                    double temperature) {
    std::vector<double> losses;
    MatrixXd g;
    for (int s = 0; s < steps; ++s) {
        losses.push_back(context_loss(cpt, sets, temperature, &g));
        cpt -= learning_rate * g;
    }
    losses.push_back(context_loss(cpt, sets, temperature));
    return losses;
}

std::vector<int> compose(std::span<const LearnedConcept> concepts, const std::optional<LearnedSubject>& subject,
                         const std::string& subject_words, const core::PromptTemplate& tmpl,
                         const core::Vocabulary& vocab) {
    std::set<int> seen;
    std::vector<int> cpt;
    for (const auto& c : concepts) {
        for (int id : c.ids) {
            if (!seen.insert(id).second) throw UserError("pseudo id " + std::to_string(id) + " used by two concepts");
            cpt.push_back(id);
        }
    }
    std::vector<int> subj;
    if (subject) {
        if (!seen.insert(subject->id).second) {
            throw UserError("subject pseudo id " + std::to_string(subject->id) + " collides with a concept token");
        }
        subj.push_back(subject->id);
    } else if (!subject_words.empty()) {
        subj = vocab.tokenize(subject_words);
    }
    return core::render_template(tmpl, vocab, subj, cpt);
}

void install(core::EmbeddingTable& table, const LearnedConcept& learned, const std::optional<LearnedSubject>& subject) {
    for (std::size_t i = 0; i < learned.ids.size(); ++i) {
        table.set_pseudo_row(learned.ids[i], learned.vectors.col(static_cast<Eigen::Index>(i)));
    }
    if (subject) table.set_pseudo_row(subject->id, subject->vector);
}

void save_concept(const std::filesystem::path& dir, const LearnedConcept& learned,
                  const std::optional<LearnedSubject>& subject) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    nlohmann::json meta = {{"dim", learned.vectors.rows()},
                           {"concept_ids", learned.ids},
                           {"spec", learned.spec.to_json()},
                           {"provenance", learned.provenance},
                           {"subject_id", subject ? nlohmann::json(subject->id) : nlohmann::json(nullptr)},
                           {"vectors", "embeddings.vec"}};
    std::ofstream j(dir / "concept.json");
    if (!j) throw IoError("cannot write " + (dir / "concept.json").string());
    j << meta.dump(2) << '\n';
    std::ofstream v(dir / "embeddings.vec", std::ios::binary);
    if (!v) throw IoError("cannot write " + (dir / "embeddings.vec").string());
    auto put = [&](const VectorXd& x) {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(x(i)));
            const char bytes[4] = {static_cast<char>(u), static_cast<char>(u >> 8), static_cast<char>(u >> 16),
                                   static_cast<char>(u >> 24)};
            v.write(bytes, 4);
        }
    };
    if (subject) put(subject->vector);
    for (Eigen::Index i = 0; i < learned.vectors.cols(); ++i) put(learned.vectors.col(i));
    if (!v || !j) throw IoError("write failed in " + dir.string());
}

std::pair<LearnedConcept, std::optional<LearnedSubject>> load_concept(const std::filesystem::path& dir) {
    std::ifstream j(dir / "concept.json");
    if (!j) throw IoError("cannot read " + (dir / "concept.json").string());
    LearnedConcept c;
    std::optional<LearnedSubject> s;
    int dim = 0;
    try {
        const auto meta = nlohmann::json::parse(j);
        dim = meta.at("dim").get<int>();
        c.ids = meta.at("concept_ids").get<std::vector<int>>();
        c.spec = core::ConceptSpec::from_json([&] {
            auto sp = meta.at("spec");
            sp.erase("pseudo_ids");
            return sp;
        }());
        c.spec.pseudo_ids = c.ids;
        c.provenance = meta.at("provenance");
        if (!meta.at("subject_id").is_null()) s = LearnedSubject{meta.at("subject_id").get<int>(), {}, c.provenance};
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("concept.json: ") + e.what());
    }
    std::ifstream v(dir / "embeddings.vec", std::ios::binary);
    if (!v) throw IoError("cannot read " + (dir / "embeddings.vec").string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(v)), std::istreambuf_iterator<char>());
    const std::size_t rows = c.ids.size() + (s ? 1 : 0);
    if (bytes.size() != rows * static_cast<std::size_t>(dim) * 4) throw UserError("embeddings.vec has the wrong size");
    std::size_t off = 0;
    auto get = [&]() {
        VectorXd x(dim);
        for (int i = 0; i < dim; ++i, off += 4) {
            const std::uint32_t u = bytes[off] | (bytes[off + 1] << 8) | (bytes[off + 2] << 16) |
                                    (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
            x(i) = std::bit_cast<float>(u);
        }
        return x;
    };
    if (s) s->vector = get();
    c.vectors.resize(dim, static_cast<Eigen::Index>(c.ids.size()));
    for (Eigen::Index i = 0; i < c.vectors.cols(); ++i) c.vectors.col(i) = get();
    return {c, s};
}

}  // namespace lego::inversion
