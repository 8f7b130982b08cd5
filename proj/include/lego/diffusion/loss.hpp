// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lego/core/rng.hpp"
#include "lego/diffusion/backbone.hpp"

namespace lego::diffusion {

/// Timesteps and Gaussian noise for one batch (noise shaped like the batch).
struct NoiseDraw {
    std::vector<int> t;
    Eigen::MatrixXd eps;
};

NoiseDraw draw_noise(const nn::FeatureMap& x0, const NoiseSchedule& schedule, Rng& rng);

/// Any epsilon predictor: receives x_t and the timesteps.
using EpsPredictor = std::function<Eigen::MatrixXd(const nn::FeatureMap& x_t, std::span<const int> t)>;

/// x_t for every sample of the batch.
nn::FeatureMap noised_batch(const nn::FeatureMap& x0, const NoiseDraw& draw, const NoiseSchedule& schedule);

/// Mean squared error between the drawn noise and the prediction.
double ldm_loss(const nn::FeatureMap& x0, const NoiseDraw& draw, const NoiseSchedule& schedule,
                const EpsPredictor& predict);

/// Gradient sinks for the backbone loss; null members are skipped.
struct LossGrads {
    DenoiserParams* denoiser = nullptr;
    textenc::TextEncoderParams* encoder = nullptr;
    /// d x V, accumulated at every token occurrence.
    Eigen::MatrixXd* embeddings = nullptr;
};

/// Backbone loss with prompts encoded through `table`. Gradients are those of
/// the returned mean.
double ldm_loss(const Backbone& backbone, const core::EmbeddingTable& table, const nn::FeatureMap& x0,
                std::span<const std::vector<int>> prompts, const NoiseDraw& draw, LossGrads* grads = nullptr);

}  // namespace lego::diffusion
