// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/textenc/encoder.hpp"

#include "lego/core/error.hpp"
#include "lego/core/hash.hpp"

namespace lego::textenc {

TextEncoderParams::TextEncoderParams(int dim, int max_len, Rng& rng)
    : attn(dim, dim, dim, rng, 0.5), positions(MatrixXd(dim, max_len)) {
    for (int j = 0; j < max_len; ++j) {
        for (int i = 0; i < dim; ++i) positions(i, j) = 0.1 * rng.normal();
    }
}

std::string TextEncoderParams::hash() const {
    Fnv64 h;
    visit([&](const std::string& name, const MatrixXd& m) {
        h.update(name);
        h.update(m);
    });
    return h.hex();
}

Conditioning encode(std::span<const int> tokens, const core::EmbeddingTable& table,
                    const TextEncoderParams& params, EncoderCache* cache) {
    const int len = static_cast<int>(tokens.size());
    if (len == 0) throw UserError("cannot encode an empty token sequence");
    if (len > params.max_len()) {
        throw UserError("token sequence of length " + std::to_string(len) + " exceeds max length " +
                        std::to_string(params.max_len()));
    }
    if (table.dim() != params.dim()) throw UserError("embedding/encoder dimension mismatch");
    MatrixXd h(params.dim(), len);
    for (int j = 0; j < len; ++j) {
        const int id = tokens[static_cast<std::size_t>(j)];
        if (id < 0 || id >= table.size()) throw UserError("token id out of range: " + std::to_string(id));
        h.col(j) = table.matrix().col(id) + params.positions.col(j);
    }
    Conditioning out;
    nn::AttentionCache* ac = cache ? &cache->attn : nullptr;
    out.tokens = h + nn::attention_forward(params.attn, h, h, ac);
    out.pooled = out.tokens.rowwise().mean();
    if (cache) {
        cache->ids.assign(tokens.begin(), tokens.end());
        cache->h = std::move(h);
    }
    return out;
}

MatrixXd encode_backward(const EncoderCache& cache, const TextEncoderParams& params,
                         const MatrixXd& d_tokens, const VectorXd& d_pooled,
                         TextEncoderParams* param_grads) {
    if (param_grads && params.frozen) throw UserError("text encoder is frozen");
    const auto len = cache.h.cols();
    MatrixXd dy = d_tokens;
    dy.colwise() += d_pooled / static_cast<double>(len);
    MatrixXd dq_in, dkv_in;
    nn::attention_backward(params.attn, cache.attn, dy, param_grads ? &param_grads->attn : nullptr,
                           &dq_in, &dkv_in);
    MatrixXd dh = dy + dq_in + dkv_in;
    if (param_grads) param_grads->positions.leftCols(len) += dh;
    return dh;
}

}  // namespace lego::textenc
