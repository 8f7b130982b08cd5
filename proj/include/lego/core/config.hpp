// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace lego::core {

struct InversionConfig {
    double lambda = 0.05;          // context-loss weight
    int steps = 2000;
    double learning_rate = 5e-3;
    double momentum = 0.9;
    int batch_size = 2;            // images per mini-batch, per exemplar list
    std::uint64_t seed = 0;
    int neighbor_k = 10;
    int neighbor_every = 100;      // steps between neighbor snapshots
    double temperature = 1.0;      // context-loss logit divisor
    double subject_only_weight = 1.0;  // weight of L_inv(I_C-bar) relative to L_inv(I_C)
    bool subject_separation = true;

    /// Throws UserError.
    void validate() const;

    nlohmann::json to_json() const;
    /// Missing keys keep defaults; unknown keys are rejected.
    static InversionConfig from_json(const nlohmann::json& j);
    std::string hash() const;
};

/// Throws UserError naming the first key of `j` that is not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const std::string& where);

}  // namespace lego::core
