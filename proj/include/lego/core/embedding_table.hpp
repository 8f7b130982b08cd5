// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "lego/core/rng.hpp"
#include "lego/core/vocabulary.hpp"

namespace lego::core {

/// Token embedding matrix stored column-per-token (d x V). Only the pseudo band
/// is trainable; the remaining columns are the frozen checkpoint values.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(const Vocabulary& vocab, int dim);
    EmbeddingTable(Eigen::MatrixXd vectors, IdRange pseudo_band);

    /// Ordinary rows ~ N(0, scale^2); pseudo rows start at zero.
    static EmbeddingTable random(const Vocabulary& vocab, int dim, Rng& rng, double scale);

    int dim() const { return static_cast<int>(vectors_.rows()); }
    int size() const { return static_cast<int>(vectors_.cols()); }
    IdRange pseudo_band() const { return pseudo_band_; }
    bool trainable(int id) const { return pseudo_band_.contains(id); }
    std::vector<bool> trainable_mask() const;

    Eigen::VectorXd row(int id) const { return vectors_.col(id); }
    const Eigen::MatrixXd& matrix() const { return vectors_; }

    /// Throws UserError for ids outside the pseudo band.
    void set_pseudo_row(int id, const Eigen::VectorXd& v);
    /// Unrestricted access; only backbone pretraining may touch frozen rows.
    Eigen::MatrixXd& mutable_matrix() { return vectors_; }

    /// Fingerprint of every non-pseudo column.
    std::string frozen_hash() const;
    /// Fingerprint of the given columns.
    std::string rows_hash(const std::vector<int>& ids) const;

private:
    Eigen::MatrixXd vectors_;
    IdRange pseudo_band_;
};

}  // namespace lego::core
