// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/diffusion/schedule.hpp"

#include <cmath>

#include "lego/core/error.hpp"

namespace lego::diffusion {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw UserError("schedule needs T >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw UserError("schedule needs 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.beta_start_ = beta_start;
    s.beta_end_ = beta_end;
    s.betas_.resize(static_cast<std::size_t>(steps));
    s.alpha_bars_.resize(static_cast<std::size_t>(steps));
    double prod = 1.0;
    for (int i = 0; i < steps; ++i) {
        const double b = steps == 1 ? beta_start
                                    : beta_start + (beta_end - beta_start) * i / (steps - 1);
        s.betas_[static_cast<std::size_t>(i)] = b;
        prod *= 1.0 - b;
        s.alpha_bars_[static_cast<std::size_t>(i)] = prod;
    }
    return s;
}

std::size_t NoiseSchedule::index(int t) const {
    if (t < 1 || t > steps()) {
        throw UserError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
    }
    return static_cast<std::size_t>(t - 1);
}

Eigen::MatrixXd NoiseSchedule::q_sample(const Eigen::MatrixXd& x0, int t, const Eigen::MatrixXd& eps) const {
    const double ab = alpha_bars_[index(t)];
    if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) throw UserError("q_sample: noise shape mismatch");
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

nlohmann::json NoiseSchedule::to_json() const {
    return {{"kind", "linear"}, {"T", steps()}, {"beta_start", beta_start_}, {"beta_end", beta_end_}};
}

NoiseSchedule NoiseSchedule::from_json(const nlohmann::json& j) {
    try {
        if (j.at("kind").get<std::string>() != "linear") throw UserError("unsupported schedule kind");
        return linear(j.at("T").get<int>(), j.at("beta_start").get<double>(), j.at("beta_end").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("schedule: ") + e.what());
    }
}

}  // namespace lego::diffusion
