// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/diffusion/sampler.hpp"

#include <cmath>

#include "lego/core/error.hpp"
#include "lego/corpus/scene.hpp"

namespace lego::diffusion {

std::string to_string(SamplerKind k) { return k == SamplerKind::Ancestral ? "ancestral" : "ddim"; }

SamplerKind sampler_from_string(const std::string& s) {
    if (s == "ancestral") return SamplerKind::Ancestral;
    if (s == "ddim") return SamplerKind::Ddim;
    throw UserError("unknown sampler '" + s + "' (expected ancestral or ddim)");
}

void SampleOptions::validate(const NoiseSchedule& schedule) const {
    if (steps < 1 || steps > schedule.steps()) {
        throw UserError("sampling steps must lie in [1, " + std::to_string(schedule.steps()) + "]");
    }
    if (!(guidance_scale >= 0.0) || !std::isfinite(guidance_scale)) throw UserError("guidance scale must be >= 0");
}

std::vector<int> sampling_timesteps(int T, int steps) {
    std::vector<int> ts;
    for (int i = steps; i >= 1; --i) {
        const int t = static_cast<int>((static_cast<long long>(i) * T + steps - 1) / steps);
        if (ts.empty() || ts.back() != t) ts.push_back(t);
    }
    return ts;
}

core::Image sample(std::span<const int> prompt, const Backbone& backbone, const core::EmbeddingTable& table,
                   const SampleOptions& options) {
    const NoiseSchedule& sch = backbone.schedule;
    options.validate(sch);
    const bool guided = options.guidance_scale != 1.0;
    std::vector<textenc::Conditioning> cond;
    cond.push_back(textenc::encode(prompt, table, backbone.encoder));
    if (guided) {
        const int null_id = backbone.null_token();
        cond.push_back(textenc::encode(std::span<const int>(&null_id, 1), table, backbone.encoder));
    }

    Rng rng(options.seed);
    const int hw = corpus::kCanvas;
    nn::FeatureMap x;
    x.batch = 1;
    x.height = hw;
    x.width = hw;
    x.data.resize(3, hw * hw);
    for (Eigen::Index j = 0; j < x.data.cols(); ++j) {
        for (Eigen::Index i = 0; i < 3; ++i) x.data(i, j) = rng.normal();
    }

    const double eta = options.kind == SamplerKind::Ancestral ? 1.0 : 0.0;
    const std::vector<int> ts = sampling_timesteps(sch.steps(), options.steps);
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const int t = ts[k];
        const int t_prev = k + 1 < ts.size() ? ts[k + 1] : 0;
        Eigen::MatrixXd eps;
        if (guided) {
            nn::FeatureMap pair;
            pair.batch = 2;
            pair.height = hw;
            pair.width = hw;
            pair.data.resize(3, 2 * x.data.cols());
            pair.data << x.data, x.data;
            const int tt[2] = {t, t};
            const nn::FeatureMap out = denoiser_forward(backbone.denoiser, pair, tt, cond);
            const auto c = out.data.leftCols(x.data.cols());
            const auto u = out.data.rightCols(x.data.cols());
            eps = u + options.guidance_scale * (c - u);
        } else {
            const int tt[1] = {t};
            eps = denoiser_forward(backbone.denoiser, x, tt, cond).data;
        }
        const double ab = sch.alpha_bar(t);
        const double ab_prev = sch.alpha_bar(t_prev);
        Eigen::MatrixXd x0 = ((x.data - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab)).cwiseMax(-1.0).cwiseMin(1.0);
        eps = (x.data - std::sqrt(ab) * x0) / std::sqrt(1.0 - ab);
        const double sigma = eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
        const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
        Eigen::MatrixXd next = std::sqrt(ab_prev) * x0 + dir * eps;
        if (sigma > 0.0) {
            for (Eigen::Index j = 0; j < next.cols(); ++j) {
                for (Eigen::Index i = 0; i < 3; ++i) next(i, j) += sigma * rng.normal();
            }
        }
        x.data = std::move(next);
        if (!x.data.allFinite()) throw NumericalError("sampler produced non-finite values");
    }
    core::Image img = image_from_feature_map(x, 0);
    img.clamp();
    return img;
}

}  // namespace lego::diffusion
