// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lego/core/embedding_table.hpp"
#include "lego/core/image.hpp"
#include "lego/diffusion/backbone.hpp"

namespace lego::diffusion {

enum class SamplerKind { Ancestral, Ddim };

std::string to_string(SamplerKind k);
SamplerKind sampler_from_string(const std::string& s);

struct SampleOptions {
    int steps = 50;
    std::uint64_t seed = 0;
    double guidance_scale = 3.0;
    SamplerKind kind = SamplerKind::Ancestral;

    /// Throws UserError unless 1 <= steps <= T and guidance_scale >= 0.
    void validate(const NoiseSchedule& schedule) const;
};

/// Descending timesteps visited by a sampler with `steps` evaluations.
std::vector<int> sampling_timesteps(int T, int steps);

/// Draws one image for the prompt. Deterministic given the options; a
/// guidance scale of 1 skips the unconditional pass.
core::Image sample(std::span<const int> prompt, const Backbone& backbone, const core::EmbeddingTable& table,
                   const SampleOptions& options);

}  // namespace lego::diffusion
