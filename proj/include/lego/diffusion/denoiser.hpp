// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "lego/core/image.hpp"
#include "lego/core/rng.hpp"
#include "lego/nn/layers.hpp"
#include "lego/textenc/encoder.hpp"

namespace lego::diffusion {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct DenoiserDims {
    int c1 = 32;
    int c2 = 48;
    int c3 = 64;
    int hidden = 128;
    int time_dim = 32;
    int cond_dim = 64;
    int attn_dim = 64;

    nlohmann::json to_json() const;
    static DenoiserDims from_json(const nlohmann::json& j);
    bool operator==(const DenoiserDims&) const = default;
};

/// Small U-Net epsilon predictor for 32x32 RGB. Timestep and pooled prompt
/// drive per-block FiLM; the 8x8 bottleneck cross-attends to the per-token
/// prompt vectors.
struct DenoiserParams {
    static constexpr int kFilmBlocks = 7;

    DenoiserDims dims;
    nn::Linear embed;
    nn::Conv2d conv_in, down1, down2, mid, up1, up2, refine, conv_out;
    std::array<nn::Linear, kFilmBlocks> film;
    nn::Attention xattn;

    DenoiserParams() = default;
    DenoiserParams(const DenoiserDims& dims, Rng& rng);

    template <class F> void visit(F&& f) { visit_impl(*this, f); }
    template <class F> void visit(F&& f) const { visit_impl(*this, f); }

    std::string hash() const;

private:
    template <class Self, class F> static void visit_impl(Self& s, F& f) {
        s.embed.visit("unet.embed", f);
        s.conv_in.visit("unet.conv_in", f);
        s.down1.visit("unet.down1", f);
        s.down2.visit("unet.down2", f);
        s.mid.visit("unet.mid", f);
        s.up1.visit("unet.up1", f);
        s.up2.visit("unet.up2", f);
        s.refine.visit("unet.refine", f);
        s.conv_out.visit("unet.conv_out", f);
        for (int i = 0; i < kFilmBlocks; ++i) s.film[static_cast<std::size_t>(i)].visit("unet.film" + std::to_string(i), f);
        s.xattn.visit("unet.xattn", f);
    }
};

/// Sinusoidal embedding of integer timesteps (dim x batch).
MatrixXd timestep_embedding(std::span<const int> t, int dim);

struct DenoiserCache {
    MatrixXd zin, zpre, z;
    std::array<MatrixXd, DenoiserParams::kFilmBlocks> films;
    // Conv outputs before FiLM, and FiLM outputs before SiLU, per block.
    std::array<nn::FeatureMap, DenoiserParams::kFilmBlocks> pre, filmed;
    std::array<nn::ConvCache, 8> conv;
    std::vector<nn::AttentionCache> attn;
};

/// Predicts the noise for a batch. `cond` holds one conditioning per sample.
nn::FeatureMap denoiser_forward(const DenoiserParams& p, const nn::FeatureMap& x, std::span<const int> t,
                                std::span<const textenc::Conditioning> cond, DenoiserCache* cache = nullptr);

/// Gradients flowing back into the prompt encoding, one entry per sample.
struct ConditioningGrads {
    std::vector<MatrixXd> tokens;
    std::vector<VectorXd> pooled;
};

/// Accumulates parameter gradients into `grad` (if non-null) and writes
/// conditioning gradients into `cond_grad` (if non-null).
void denoiser_backward(const DenoiserParams& p, const DenoiserCache& cache, const nn::FeatureMap& dout,
                       DenoiserParams* grad, ConditioningGrads* cond_grad);

/// Images to a (3 x batch*H*W) feature map and back.
nn::FeatureMap to_feature_map(std::span<const core::Image> images);
nn::FeatureMap to_feature_map(const core::Image& image);
core::Image image_from_feature_map(const nn::FeatureMap& f, int index);

}  // namespace lego::diffusion
