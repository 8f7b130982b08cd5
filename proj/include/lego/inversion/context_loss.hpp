// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include <Eigen/Core>

#include "lego/core/concept.hpp"
#include "lego/core/embedding_table.hpp"

namespace lego::inversion {

using Eigen::MatrixXd;

/// Snapshots of frozen rows: positives[i] and negatives[i] are d x |P_i| and
/// d x |N_i| (a negative set may be empty).
struct ContextSets {
    std::vector<MatrixXd> positives;
    std::vector<MatrixXd> negatives;

    int size() const { return static_cast<int>(positives.size()); }

    static ContextSets from_spec(const core::ConceptSpec& spec, const core::Vocabulary& vocab,
                                 const core::EmbeddingTable& table);
};

/// -sum_i log( sum_k exp(c_i.P_ik / tau) / (sum_k exp(c_i.P_ik / tau) + sum_k exp(c_i.N_ik / tau)) )
/// for the columns c_i of `cpt` (d x n). Writes dL/dcpt when `grad` is
/// non-null. Throws UserError for an empty positive set or mismatched shapes.
double context_loss(const MatrixXd& cpt, const ContextSets& sets, double temperature = 1.0,
                    MatrixXd* grad = nullptr);

}  // namespace lego::inversion
