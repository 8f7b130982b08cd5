// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/core/config.hpp"

#include <cmath>

#include "lego/core/error.hpp"
#include "lego/core/hash.hpp"

namespace lego::core {

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    if (!j.is_object()) throw UserError(where + ": expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw UserError(where + ": unknown key '" + key + "'");
    }
}

void InversionConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UserError("inversion: lambda must be >= 0");
    if (steps < 0) throw UserError("inversion: steps must be >= 0");
    if (!(learning_rate > 0.0)) throw UserError("inversion: learning_rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw UserError("inversion: momentum must be in [0,1)");
    if (batch_size < 1) throw UserError("inversion: batch_size must be >= 1");
    if (neighbor_k < 1) throw UserError("inversion: neighbor_k must be >= 1");
    if (neighbor_every < 1) throw UserError("inversion: neighbor_every must be >= 1");
    if (!(temperature > 0.0)) throw UserError("inversion: temperature must be > 0");
    if (!(subject_only_weight >= 0.0)) throw UserError("inversion: subject_only_weight must be >= 0");
}

nlohmann::json InversionConfig::to_json() const {
    return {{"lambda", lambda},
            {"steps", steps},
            {"learning_rate", learning_rate},
            {"momentum", momentum},
            {"batch_size", batch_size},
            {"seed", seed},
            {"neighbor_k", neighbor_k},
            {"neighbor_every", neighbor_every},
            {"temperature", temperature},
            {"subject_only_weight", subject_only_weight},
            {"subject_separation", subject_separation}};
}

InversionConfig InversionConfig::from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"lambda", "steps", "learning_rate", "momentum", "batch_size", "seed",
                            "neighbor_k", "neighbor_every", "temperature", "subject_only_weight",
                            "subject_separation"},
                        "inversion");
    InversionConfig c;
    try {
        c.lambda = j.value("lambda", c.lambda);
        c.steps = j.value("steps", c.steps);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.momentum = j.value("momentum", c.momentum);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.seed = j.value("seed", c.seed);
        c.neighbor_k = j.value("neighbor_k", c.neighbor_k);
        c.neighbor_every = j.value("neighbor_every", c.neighbor_every);
        c.temperature = j.value("temperature", c.temperature);
        c.subject_only_weight = j.value("subject_only_weight", c.subject_only_weight);
        c.subject_separation = j.value("subject_separation", c.subject_separation);
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("inversion: ") + e.what());
    }
    c.validate();
    return c;
}

std::string InversionConfig::hash() const { return hash_hex(to_json().dump()); }

}  // namespace lego::core
