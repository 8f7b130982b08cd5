// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "lego/core/concept.hpp"
#include "lego/core/config.hpp"
#include "lego/core/embedding_table.hpp"
#include "lego/diffusion/backbone.hpp"
#include "lego/diffusion/loss.hpp"
#include "lego/inversion/context_loss.hpp"

namespace lego::inversion {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct InversionBatch {
    nn::FeatureMap x0;
    std::vector<std::vector<int>> prompts;
    diffusion::NoiseDraw draw;
};

/// The backbone loss on `batch` with gradients flowing only into the rows in
/// `grad_targets`. `grad` (d x V) receives dL/d(row) for those rows and is
/// zero elsewhere. Throws UserError when a prompt uses a pseudo id outside
/// `grad_targets` while gradients are requested.
double inversion_loss(const InversionBatch& batch, const diffusion::Backbone& backbone,
                      const core::EmbeddingTable& table, std::span<const int> grad_targets,
                      MatrixXd* grad = nullptr);

struct LearnedSubject {
    int id = 0;
    VectorXd vector;
    nlohmann::json provenance;
};

struct LearnedConcept {
    std::vector<int> ids;
    MatrixXd vectors;  // d x n
    core::ConceptSpec spec;
    nlohmann::json provenance;
};

struct LogRow {
    int step = 0;
    double inv_subject_only = 0.0;
    double inv_concept = 0.0;
    double context = 0.0;
    double total = 0.0;
};

struct Neighbors {
    std::vector<int> top;     // word ids, most similar first
    std::vector<int> bottom;  // least similar first
};

struct NeighborSnapshot {
    int step = 0;
    int id = 0;
    Neighbors neighbors;
};

struct TrainingLog {
    std::vector<LogRow> rows;
    std::vector<NeighborSnapshot> snapshots;

    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;
};

struct LegoResult {
    std::optional<LearnedSubject> subject;
    LearnedConcept learned;
    TrainingLog log;
    core::EmbeddingTable table;  // the input table with the learned pseudo rows written in
};

/// Pseudo ids for a run: the spec's own ids when present, otherwise the
/// first n of the band after the subject slot. The subject takes the lowest
/// band id not used by the concept.
struct PseudoAssignment {
    int subject = 0;
    std::vector<int> tokens;
};
PseudoAssignment assign_pseudo_ids(const core::ConceptSpec& spec, const core::Vocabulary& vocab);

/// Joint optimization of the subject and concept rows. Every step draws one
/// batch from I_C-bar (subject-only templates, gradients to the subject) and
/// one from I_C (gradients to the subject and every concept token). Without
/// subject separation only the I_C batch is drawn, with `{subj}` removed
/// from its templates. `table` defaults to the backbone's.
/// Concept rows start at the mean of their positive rows when lambda > 0 and
/// at a random unit vector otherwise; the subject starts at
/// `subject_init_word` or a random unit vector.
LegoResult lego_optimize(const core::ExemplarSet& exemplars, const core::ConceptSpec& spec,
                         const diffusion::Backbone& backbone, const core::InversionConfig& config,
                         const core::EmbeddingTable* table = nullptr);

/// Ordinary words ranked by raw dot product with `v`; ties go to the lower id.
Neighbors neighbor_report(const VectorXd& v, const core::EmbeddingTable& table, const core::Vocabulary& vocab,
                          int k);

/// Plain gradient descent on the context loss alone. Returns the loss before
/// each step followed by the final loss; `cpt` is updated in place.
std::vector<double> context_descent(MatrixXd& cpt, const ContextSets& sets, int steps, double learning_rate,
                                    double temperature = 1.0);

/// Renders `tmpl` with the concepts' ids filling {cpt_1..} in order and the
/// subject (pseudo id or ordinary words) in {subj}. Throws UserError on
/// colliding pseudo ids or placeholder arity mismatch.
std::vector<int> compose(std::span<const LearnedConcept> concepts, const std::optional<LearnedSubject>& subject,
                         const std::string& subject_words, const core::PromptTemplate& tmpl,
                         const core::Vocabulary& vocab);

/// Writes the learned rows into `table`.
void install(core::EmbeddingTable& table, const LearnedConcept& learned, const std::optional<LearnedSubject>& subject);

/// `dir/concept.json` plus `dir/embeddings.vec` (little-endian float32,
/// subject first when present, then the learned tokens in order).
void save_concept(const std::filesystem::path& dir, const LearnedConcept& learned,
                  const std::optional<LearnedSubject>& subject);
std::pair<LearnedConcept, std::optional<LearnedSubject>> load_concept(const std::filesystem::path& dir);

}  // namespace lego::inversion
