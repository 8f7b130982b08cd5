// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/diffusion/denoiser.hpp"

#include <cmath>

#include "lego/core/error.hpp"
#include "lego/core/hash.hpp"

namespace lego::diffusion {

using nn::FeatureMap;

nlohmann::json DenoiserDims::to_json() const {
    return {{"c1", c1}, {"c2", c2}, {"c3", c3}, {"hidden", hidden},
            {"time_dim", time_dim}, {"cond_dim", cond_dim}, {"attn_dim", attn_dim}};
}

DenoiserDims DenoiserDims::from_json(const nlohmann::json& j) {
    DenoiserDims d;
    d.c1 = j.at("c1").get<int>();
    d.c2 = j.at("c2").get<int>();
    d.c3 = j.at("c3").get<int>();
    d.hidden = j.at("hidden").get<int>();
    d.time_dim = j.at("time_dim").get<int>();
    d.cond_dim = j.at("cond_dim").get<int>();
    d.attn_dim = j.at("attn_dim").get<int>();
    return d;
}

DenoiserParams::DenoiserParams(const DenoiserDims& d, Rng& rng)
    : dims(d),
      embed(d.time_dim + d.cond_dim, d.hidden, rng),
      conv_in(3, d.c1, 1, rng),
      down1(d.c1, d.c2, 2, rng),
      down2(d.c2, d.c3, 2, rng),
      mid(d.c3, d.c3, 1, rng),
      up1(d.c3, d.c2, 1, rng),
      up2(d.c2, d.c1, 1, rng),
      refine(d.c1, d.c1, 1, rng),
      conv_out(d.c1, 3, 1, rng, 0.1),
      xattn(d.c3, d.cond_dim, d.attn_dim, rng, 0.5) {
    const std::array<int, kFilmBlocks> width{d.c1, d.c2, d.c3, d.c3, d.c2, d.c1, d.c1};
    for (std::size_t i = 0; i < film.size(); ++i) film[i] = nn::Linear(d.hidden, 2 * width[i], rng, 0.1);
}

std::string DenoiserParams::hash() const {
    Fnv64 h;
    visit([&](const std::string& name, const MatrixXd& m) {
        h.update(name);
        h.update(m);
    });
    return h.hex();
}

MatrixXd timestep_embedding(std::span<const int> t, int dim) {
    const int half = dim / 2;
    MatrixXd e = MatrixXd::Zero(dim, static_cast<Eigen::Index>(t.size()));
    for (std::size_t b = 0; b < t.size(); ++b) {
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(1000.0) * i / half);
            e(i, static_cast<Eigen::Index>(b)) = std::sin(t[b] * freq);
            e(half + i, static_cast<Eigen::Index>(b)) = std::cos(t[b] * freq);
        }
    }
    return e;
}

namespace {

FeatureMap add(FeatureMap a, const FeatureMap& b) {
    a.data += b.data;
    return a;
}

FeatureMap silu_map(const FeatureMap& x) {
    FeatureMap y = x;
    y.data = nn::silu(x.data);
    return y;
}

FeatureMap silu_map_backward(const FeatureMap& x, const FeatureMap& dy) {
    FeatureMap dx = dy;
    dx.data = nn::silu_backward(x.data, dy.data);
    return dx;
}

Eigen::Map<const MatrixXd> sample_block(const FeatureMap& f, int b) {
    return {f.data.data() + static_cast<Eigen::Index>(b) * f.plane() * f.channels(), f.channels(), f.plane()};
}

}  // namespace

FeatureMap denoiser_forward(const DenoiserParams& p, const FeatureMap& x, std::span<const int> t,
                            std::span<const textenc::Conditioning> cond, DenoiserCache* cache) {
    const int batch = x.batch;
    if (static_cast<int>(t.size()) != batch || static_cast<int>(cond.size()) != batch) {
        throw UserError("denoiser: batch size mismatch");
    }
    if (x.channels() != 3) throw UserError("denoiser: expected 3 input channels");
    const int td = p.dims.time_dim;
    MatrixXd zin(td + p.dims.cond_dim, batch);
    zin.topRows(td) = timestep_embedding(t, td);
    for (int b = 0; b < batch; ++b) {
        if (cond[static_cast<std::size_t>(b)].pooled.size() != p.dims.cond_dim) {
            throw UserError("denoiser: conditioning width mismatch");
        }
        zin.block(td, b, p.dims.cond_dim, 1) = cond[static_cast<std::size_t>(b)].pooled;
    }
    MatrixXd zpre = nn::linear_forward(p.embed, zin);
    MatrixXd z = nn::silu(zpre);

    std::array<MatrixXd, DenoiserParams::kFilmBlocks> films;
    for (std::size_t i = 0; i < films.size(); ++i) films[i] = nn::linear_forward(p.film[i], z);

    DenoiserCache local;
    DenoiserCache& c = cache ? *cache : local;
    const bool keep = cache != nullptr;
    auto block = [&](int i, const nn::Conv2d& conv, const FeatureMap& in) {
        FeatureMap a = nn::conv_forward(conv, in, keep ? &c.conv[static_cast<std::size_t>(i)] : nullptr);
        FeatureMap f = nn::film_forward(a, films[static_cast<std::size_t>(i)]);
        FeatureMap h = silu_map(f);
        if (keep) {
            c.pre[static_cast<std::size_t>(i)] = std::move(a);
            c.filmed[static_cast<std::size_t>(i)] = std::move(f);
        }
        return h;
    };

    const FeatureMap h1 = block(0, p.conv_in, x);
    const FeatureMap h2 = block(1, p.down1, h1);
    const FeatureMap h3 = block(2, p.down2, h2);
    FeatureMap h4 = block(3, p.mid, h3);

    if (keep) c.attn.assign(static_cast<std::size_t>(batch), {});
    FeatureMap h5 = h4;
    for (int b = 0; b < batch; ++b) {
        const MatrixXd q_in = sample_block(h4, b);
        const MatrixXd r = nn::attention_forward(p.xattn, q_in, cond[static_cast<std::size_t>(b)].tokens,
                                                 keep ? &c.attn[static_cast<std::size_t>(b)] : nullptr);
        h5.data.middleCols(static_cast<Eigen::Index>(b) * h4.plane(), h4.plane()) += r;
    }

    const FeatureMap h6 = add(block(4, p.up1, nn::upsample2x(h5)), h2);
    const FeatureMap h7 = add(block(5, p.up2, nn::upsample2x(h6)), h1);
    const FeatureMap h8 = add(block(6, p.refine, h7), h7);
    FeatureMap out = nn::conv_forward(p.conv_out, h8, keep ? &c.conv[7] : nullptr);

    if (keep) {
        c.zin = std::move(zin);
        c.zpre = std::move(zpre);
        c.z = std::move(z);
        c.films = std::move(films);
    }
    return out;
}

void denoiser_backward(const DenoiserParams& p, const DenoiserCache& c, const FeatureMap& dout,
                       DenoiserParams* grad, ConditioningGrads* cond_grad) {
    std::array<MatrixXd, DenoiserParams::kFilmBlocks> dfilm;
    auto block_back = [&](int i, const nn::Conv2d& conv, nn::Conv2d* g, const FeatureMap& dh, bool want_dx) {
        const auto k = static_cast<std::size_t>(i);
        const FeatureMap df = silu_map_backward(c.filmed[k], dh);
        const FeatureMap da = nn::film_backward(c.pre[k], c.films[k], df, &dfilm[k]);
        return nn::conv_backward(conv, c.conv[k], da, g, want_dx);
    };

    const FeatureMap dh8 = nn::conv_backward(p.conv_out, c.conv[7], dout, grad ? &grad->conv_out : nullptr, true);
    const FeatureMap dh7 = add(block_back(6, p.refine, grad ? &grad->refine : nullptr, dh8, true), dh8);
    const FeatureMap dh1_skip = dh7;
    const FeatureMap dh6 =
        nn::upsample2x_backward(block_back(5, p.up2, grad ? &grad->up2 : nullptr, dh7, true));
    const FeatureMap dh2_skip = dh6;
    const FeatureMap dh5 =
        nn::upsample2x_backward(block_back(4, p.up1, grad ? &grad->up1 : nullptr, dh6, true));

    const int batch = dh5.batch;
    const int plane = dh5.plane();
    FeatureMap dh4 = dh5;
    if (cond_grad) {
        cond_grad->tokens.assign(static_cast<std::size_t>(batch), MatrixXd());
        cond_grad->pooled.assign(static_cast<std::size_t>(batch), VectorXd());
    }
    for (int b = 0; b < batch; ++b) {
        const MatrixXd dr = sample_block(dh5, b);
        MatrixXd dq;
        MatrixXd dkv;
        nn::attention_backward(p.xattn, c.attn[static_cast<std::size_t>(b)], dr, grad ? &grad->xattn : nullptr, &dq,
                               cond_grad ? &dkv : nullptr);
        dh4.data.middleCols(static_cast<Eigen::Index>(b) * plane, plane) += dq;
        if (cond_grad) cond_grad->tokens[static_cast<std::size_t>(b)] = std::move(dkv);
    }

    const FeatureMap dh3 = block_back(3, p.mid, grad ? &grad->mid : nullptr, dh4, true);
    const FeatureMap dh2 = add(block_back(2, p.down2, grad ? &grad->down2 : nullptr, dh3, true), dh2_skip);
    const FeatureMap dh1 = add(block_back(1, p.down1, grad ? &grad->down1 : nullptr, dh2, true), dh1_skip);
    block_back(0, p.conv_in, grad ? &grad->conv_in : nullptr, dh1, false);

    MatrixXd dz = MatrixXd::Zero(c.z.rows(), c.z.cols());
    for (std::size_t i = 0; i < dfilm.size(); ++i) {
        dz += nn::linear_backward(p.film[i], c.z, dfilm[i], grad ? &grad->film[i] : nullptr);
    }
    const MatrixXd dzpre = nn::silu_backward(c.zpre, dz);
    const MatrixXd dzin = nn::linear_backward(p.embed, c.zin, dzpre, grad ? &grad->embed : nullptr);
    if (cond_grad) {
        for (int b = 0; b < batch; ++b) {
            cond_grad->pooled[static_cast<std::size_t>(b)] = dzin.block(p.dims.time_dim, b, p.dims.cond_dim, 1);
        }
    }
}

FeatureMap to_feature_map(std::span<const core::Image> images) {
    if (images.empty()) throw UserError("empty image batch");
    FeatureMap f;
    f.batch = static_cast<int>(images.size());
    f.height = images[0].height();
    f.width = images[0].width();
    f.data.resize(3, static_cast<Eigen::Index>(f.batch) * f.plane());
    for (int b = 0; b < f.batch; ++b) {
        const core::Image& img = images[static_cast<std::size_t>(b)];
        if (img.height() != f.height || img.width() != f.width) throw UserError("image batch size mismatch");
        const auto d = img.data();
        for (int ch = 0; ch < 3; ++ch) {
            for (int i = 0; i < f.plane(); ++i) {
                f.data(ch, static_cast<Eigen::Index>(b) * f.plane() + i) = d[static_cast<std::size_t>(ch * f.plane() + i)];
            }
        }
    }
    return f;
}

FeatureMap to_feature_map(const core::Image& image) { return to_feature_map(std::span<const core::Image>(&image, 1)); }

core::Image image_from_feature_map(const FeatureMap& f, int index) {
    core::Image img(f.height, f.width);
    auto d = img.data();
    for (int ch = 0; ch < 3; ++ch) {
        for (int i = 0; i < f.plane(); ++i) {
            d[static_cast<std::size_t>(ch * f.plane() + i)] = f.data(ch, static_cast<Eigen::Index>(index) * f.plane() + i);
        }
    }
    return img;
}

}  // namespace lego::diffusion
