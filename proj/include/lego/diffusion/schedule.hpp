// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace lego::diffusion {

/// Linear beta schedule. Timesteps are 1-based: t in [1, T].
class NoiseSchedule {
public:
    NoiseSchedule() = default;
    /// Throws UserError unless 0 < beta_start <= beta_end < 1 and T >= 1.
    static NoiseSchedule linear(int steps, double beta_start, double beta_end);

    int steps() const { return static_cast<int>(betas_.size()); }
    double beta(int t) const { return betas_[index(t)]; }
    double alpha(int t) const { return 1.0 - beta(t); }
    /// alpha_bar(0) == 1.
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars_[index(t)]; }
    double beta_start() const { return beta_start_; }
    double beta_end() const { return beta_end_; }

    /// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps. Throws UserError
    /// for t outside [1, T] or mismatched shapes.
    Eigen::MatrixXd q_sample(const Eigen::MatrixXd& x0, int t, const Eigen::MatrixXd& eps) const;

    nlohmann::json to_json() const;
    static NoiseSchedule from_json(const nlohmann::json& j);

private:
    std::size_t index(int t) const;

    double beta_start_ = 0.0;
    double beta_end_ = 0.0;
    std::vector<double> betas_;
    std::vector<double> alpha_bars_;
};

}  // namespace lego::diffusion
