// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lego/core/image.hpp"
#include "lego/diffusion/backbone.hpp"

namespace lego::diffusion {

struct CaptionedImage {
    core::Image image;
    std::string caption;
};

struct BackboneConfig {
    DenoiserDims dims;
    int max_len = 16;
    int timesteps = 200;
    double beta_start = 5e-4;
    double beta_end = 0.1;
    int pseudo_count = 8;
    std::vector<std::string> words;  // empty means the default word list
    double embedding_scale = 0.5;

    int steps = 6000;
    int batch_size = 16;
    double learning_rate = 1e-3;
    int warmup = 200;
    double grad_clip = 1.0;
    double ema_decay = 0.999;
    double caption_dropout = 0.1;
    std::uint64_t seed = 0;
    int validation_images = 64;
    /// Final validation loss must be at most this fraction of the untrained one.
    double required_ratio = 0.5;
    int log_every = 100;

    void validate() const;
    nlohmann::json to_json() const;
    /// Rejects unknown keys; missing keys keep their defaults.
    static BackboneConfig from_json(const nlohmann::json& j);
};

struct TrainLogEntry {
    int step = 0;
    double loss = 0.0;
};

/// Fits the denoiser, text encoder and ordinary embedding rows on captioned
/// images with Adam, keeping an exponential moving average that becomes the
/// returned weights (rounded to float32). With `resume` and zero steps the
/// resumed backbone is returned unchanged. Throws NumericalError on
/// divergence and when the validation loss does not fall to
/// `required_ratio` of its untrained value; UserError for captions that do
/// not tokenize.
Backbone train_backbone(std::span<const CaptionedImage> corpus, const BackboneConfig& config,
                        const std::function<void(const TrainLogEntry&)>& on_log = {},
                        const Backbone* resume = nullptr);

/// Mean loss over fixed noise draws for the given images.
double validation_loss(const Backbone& backbone, std::span<const CaptionedImage> images, std::uint64_t seed,
                       int draws = 4);

}  // namespace lego::diffusion
