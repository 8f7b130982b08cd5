// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lego/core/embedding_table.hpp"
#include "lego/core/vocabulary.hpp"
#include "lego/diffusion/denoiser.hpp"
#include "lego/diffusion/schedule.hpp"
#include "lego/textenc/encoder.hpp"

namespace lego::diffusion {

/// Frozen text-conditioned diffusion model: schedule, denoiser, text encoder,
/// vocabulary and pretrained embedding table.
struct Backbone {
    NoiseSchedule schedule;
    DenoiserParams denoiser;
    textenc::TextEncoderParams encoder;
    core::Vocabulary vocab;
    core::EmbeddingTable table;
    /// Free-form provenance (training config, losses); saved with the checkpoint.
    nlohmann::json info = nlohmann::json::object();

    /// Id used for the empty caption in classifier-free guidance.
    int null_token() const { return 0; }

    /// Fingerprint of the denoiser and encoder weights plus frozen embedding rows.
    std::string frozen_hash() const;

    template <class F> void visit(F&& f) const {
        f("embeddings", table.matrix());
        encoder.visit(f);
        denoiser.visit(f);
    }
    template <class F> void visit(F&& f) {
        f("embeddings", table.mutable_matrix());
        encoder.visit(f);
        denoiser.visit(f);
    }
};

inline constexpr int kCheckpointVersion = 1;

/// Container: 8-byte magic, u32 little-endian header length, JSON header,
/// then every tensor as little-endian float32 in column-major order, in the
/// order listed by the header.
std::vector<std::uint8_t> serialize_checkpoint(const Backbone& b);
Backbone deserialize_checkpoint(std::span<const std::uint8_t> bytes);

/// IoError on filesystem failures; UserError on malformed content.
void save_checkpoint(const Backbone& b, const std::filesystem::path& path);
Backbone load_checkpoint(const std::filesystem::path& path);

/// Rounds every parameter to the nearest float32 value.
void round_to_float32(Backbone& b);

}  // namespace lego::diffusion
