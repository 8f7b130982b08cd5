// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/core/embedding_table.hpp"

#include "lego/core/error.hpp"
#include "lego/core/hash.hpp"

namespace lego::core {

EmbeddingTable::EmbeddingTable(const Vocabulary& vocab, int dim)
    : vectors_(Eigen::MatrixXd::Zero(dim, vocab.size())), pseudo_band_(vocab.pseudo_band()) {
    if (dim < 1) throw UserError("embedding dimension must be >= 1");
}

EmbeddingTable::EmbeddingTable(Eigen::MatrixXd vectors, IdRange pseudo_band)
    : vectors_(std::move(vectors)), pseudo_band_(pseudo_band) {
    if (pseudo_band_.begin < 0 || pseudo_band_.end > size() || pseudo_band_.size() < 1) {
        throw UserError("pseudo band outside embedding table");
    }
}

EmbeddingTable EmbeddingTable::random(const Vocabulary& vocab, int dim, Rng& rng, double scale) {
    EmbeddingTable t(vocab, dim);
    for (int id = 0; id < vocab.ordinary_count(); ++id) {
        for (int k = 0; k < dim; ++k) t.vectors_(k, id) = scale * rng.normal();
    }
    return t;
}

std::vector<bool> EmbeddingTable::trainable_mask() const {
    std::vector<bool> mask(static_cast<std::size_t>(size()));
    for (int id = 0; id < size(); ++id) mask[static_cast<std::size_t>(id)] = trainable(id);
    return mask;
}

void EmbeddingTable::set_pseudo_row(int id, const Eigen::VectorXd& v) {
    if (!trainable(id)) throw UserError("row " + std::to_string(id) + " is frozen");
    if (v.size() != dim()) throw UserError("embedding dimension mismatch");
    vectors_.col(id) = v;
}

std::string EmbeddingTable::frozen_hash() const {
    Fnv64 h;
    for (int id = 0; id < size(); ++id) {
        if (trainable(id)) continue;
        h.update(&id, sizeof(id));
        h.update(vectors_.col(id).data(), sizeof(double) * static_cast<std::size_t>(dim()));
    }
    return h.hex();
}

std::string EmbeddingTable::rows_hash(const std::vector<int>& ids) const {
    Fnv64 h;
    for (int id : ids) {
        h.update(&id, sizeof(id));
        h.update(vectors_.col(id).data(), sizeof(double) * static_cast<std::size_t>(dim()));
    }
    return h.hex();
}

}  // namespace lego::core
