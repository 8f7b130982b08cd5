// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include <Eigen/Core>

#include "lego/core/embedding_table.hpp"
#include "lego/core/rng.hpp"
#include "lego/nn/layers.hpp"

namespace lego::textenc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One residual self-attention layer over token embeddings plus learned
/// per-position additive vectors.
struct TextEncoderParams {
    nn::Attention attn;
    MatrixXd positions;  // d x max_len
    bool frozen = false;

    TextEncoderParams() = default;
    TextEncoderParams(int dim, int max_len, Rng& rng);

    int dim() const { return static_cast<int>(positions.rows()); }
    int max_len() const { return static_cast<int>(positions.cols()); }

    template <class F> void visit(F&& f) {
        attn.visit("text.attn", f);
        f("text.positions", positions);
    }
    template <class F> void visit(F&& f) const {
        attn.visit("text.attn", f);
        f("text.positions", positions);
    }

    std::string hash() const;
};

/// Per-token conditioning vectors (d x L) and their mean.
struct Conditioning {
    MatrixXd tokens;
    VectorXd pooled;
};

struct EncoderCache {
    std::vector<int> ids;
    MatrixXd h;
    nn::AttentionCache attn;
};

/// Throws UserError when the sequence is empty, longer than max_len, or holds
/// an id outside the table.
Conditioning encode(std::span<const int> tokens, const core::EmbeddingTable& table,
                    const TextEncoderParams& params, EncoderCache* cache = nullptr);

/// Back-propagates dL/dtokens and dL/dpooled. Returns dL/d(embedding column)
/// for each sequence position (d x L). Parameter gradients are accumulated
/// into `param_grads` unless it is null; frozen params reject a non-null
/// `param_grads`.
MatrixXd encode_backward(const EncoderCache& cache, const TextEncoderParams& params,
                         const MatrixXd& d_tokens, const VectorXd& d_pooled,
                         TextEncoderParams* param_grads);

}  // namespace lego::textenc
