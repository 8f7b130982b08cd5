// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "lego/core/rng.hpp"
#include "lego/core/vocabulary.hpp"
#include "lego/diffusion/backbone.hpp"

namespace lego::testing {

/// Small randomly initialized backbone for fast gradient and plumbing tests.
inline diffusion::Backbone tiny_backbone(std::uint64_t seed = 1, int dim = 8, int pseudo_count = 4) {
    Rng rng(seed);
    diffusion::Backbone b;
    b.schedule = diffusion::NoiseSchedule::linear(50, 2e-3, 0.4);
    b.vocab = core::Vocabulary::build(core::default_word_list(), pseudo_count);
    diffusion::DenoiserDims d;
    d.c1 = 8;
    d.c2 = 8;
    d.c3 = 8;
    d.hidden = 16;
    d.time_dim = 8;
    d.cond_dim = dim;
    d.attn_dim = 8;
    b.table = core::EmbeddingTable::random(b.vocab, dim, rng, 0.5);
    b.encoder = textenc::TextEncoderParams(dim, 12, rng);
    b.denoiser = diffusion::DenoiserParams(d, rng);
    b.encoder.frozen = true;
    return b;
}

inline core::Image noise_image(Rng& rng, int size = 32) {
    core::Image im(size, size);
    for (auto& v : im.data()) v = rng.uniform(-1.0, 1.0);
    return im;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(1e-12, std::max(std::abs(a), std::abs(b)));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("lego-lab-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace lego::testing
