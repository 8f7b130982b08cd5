// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/diffusion/loss.hpp"

#include <cmath>

#include "lego/core/error.hpp"

namespace lego::diffusion {

NoiseDraw draw_noise(const nn::FeatureMap& x0, const NoiseSchedule& schedule, Rng& rng) {
    NoiseDraw d;
    d.t.resize(static_cast<std::size_t>(x0.batch));
    for (auto& t : d.t) t = static_cast<int>(rng.uniform_int(1, schedule.steps()));
    d.eps.resize(x0.data.rows(), x0.data.cols());
    for (Eigen::Index j = 0; j < d.eps.cols(); ++j) {
        for (Eigen::Index i = 0; i < d.eps.rows(); ++i) d.eps(i, j) = rng.normal();
    }
    return d;
}

nn::FeatureMap noised_batch(const nn::FeatureMap& x0, const NoiseDraw& draw, const NoiseSchedule& schedule) {
    if (static_cast<int>(draw.t.size()) != x0.batch || draw.eps.rows() != x0.data.rows() ||
        draw.eps.cols() != x0.data.cols()) {
        throw UserError("noise draw does not match batch");
    }
    nn::FeatureMap xt = x0;
    const Eigen::Index plane = x0.plane();
    for (int b = 0; b < x0.batch; ++b) {
        const auto cols = Eigen::seqN(static_cast<Eigen::Index>(b) * plane, plane);
        xt.data(Eigen::all, cols) =
            schedule.q_sample(x0.data(Eigen::all, cols), draw.t[static_cast<std::size_t>(b)], draw.eps(Eigen::all, cols));
    }
    return xt;
}

double ldm_loss(const nn::FeatureMap& x0, const NoiseDraw& draw, const NoiseSchedule& schedule,
                const EpsPredictor& predict) {
    const nn::FeatureMap xt = noised_batch(x0, draw, schedule);
    const Eigen::MatrixXd pred = predict(xt, draw.t);
    if (pred.rows() != draw.eps.rows() || pred.cols() != draw.eps.cols()) {
        throw UserError("prediction shape mismatch");
    }
    return (pred - draw.eps).squaredNorm() / static_cast<double>(pred.size());
}

double ldm_loss(const Backbone& backbone, const core::EmbeddingTable& table, const nn::FeatureMap& x0,
                std::span<const std::vector<int>> prompts, const NoiseDraw& draw, LossGrads* grads) {
    if (static_cast<int>(prompts.size()) != x0.batch) throw UserError("one prompt per image required");
    const std::size_t batch = prompts.size();
    std::vector<textenc::Conditioning> cond(batch);
    std::vector<textenc::EncoderCache> enc(batch);
    const bool backprop = grads && (grads->denoiser || grads->encoder || grads->embeddings);
    for (std::size_t b = 0; b < batch; ++b) {
        cond[b] = textenc::encode(prompts[b], table, backbone.encoder, backprop ? &enc[b] : nullptr);
    }
    const nn::FeatureMap xt = noised_batch(x0, draw, backbone.schedule);
    DenoiserCache cache;
    const nn::FeatureMap pred = denoiser_forward(backbone.denoiser, xt, draw.t, cond, backprop ? &cache : nullptr);
    const Eigen::MatrixXd diff = pred.data - draw.eps;
    const double n = static_cast<double>(diff.size());
    const double loss = diff.squaredNorm() / n;
    if (!backprop) return loss;

    nn::FeatureMap dout = pred;
    dout.data = (2.0 / n) * diff;
    const bool need_cond = grads->encoder || grads->embeddings;
    ConditioningGrads cg;
    denoiser_backward(backbone.denoiser, cache, dout, grads->denoiser, need_cond ? &cg : nullptr);
    if (!need_cond) return loss;
    for (std::size_t b = 0; b < batch; ++b) {
        const Eigen::MatrixXd dh = textenc::encode_backward(enc[b], backbone.encoder, cg.tokens[b], cg.pooled[b],
                                                            grads->encoder);
        if (grads->embeddings) {
            for (std::size_t i = 0; i < prompts[b].size(); ++i) {
                grads->embeddings->col(prompts[b][i]) += dh.col(static_cast<Eigen::Index>(i));
            }
        }
    }
    return loss;
}

}  // namespace lego::diffusion
