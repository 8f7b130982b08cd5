// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "lego/core/rng.hpp"

namespace lego::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Batched feature map: rows are channels, columns run sample-major over
/// (batch, y, x).
struct FeatureMap {
    MatrixXd data;
    int batch = 0;
    int height = 0;
    int width = 0;

    int channels() const { return static_cast<int>(data.rows()); }
    int plane() const { return height * width; }
};

/// 3x3 convolution, zero padding 1, stride 1 or 2.
struct Conv2d {
    MatrixXd weight;  // cout x (9*cin), column index (ky*3 + kx)*cin + ci
    MatrixXd bias;    // cout x 1
    int stride = 1;

    Conv2d() = default;
    Conv2d(int cin, int cout, int stride, Rng& rng, double gain = 1.0);
    int in_channels() const { return static_cast<int>(weight.cols() / 9); }
    int out_channels() const { return static_cast<int>(weight.rows()); }

    template <class F> void visit(const std::string& prefix, F&& f) {
        f(prefix + ".weight", weight);
        f(prefix + ".bias", bias);
    }
    template <class F> void visit(const std::string& prefix, F&& f) const {
        f(prefix + ".weight", weight);
        f(prefix + ".bias", bias);
    }
};

struct ConvCache {
    FeatureMap input;
};

FeatureMap conv_forward(const Conv2d& conv, const FeatureMap& x, ConvCache* cache);
/// Accumulates parameter gradients into `grad` when non-null; returns dL/dx
/// when `want_dx`.
FeatureMap conv_backward(const Conv2d& conv, const ConvCache& cache, const FeatureMap& dy,
                         Conv2d* grad, bool want_dx);

struct Linear {
    MatrixXd weight;  // out x in
    MatrixXd bias;    // out x 1

    Linear() = default;
    Linear(int in, int out, Rng& rng, double gain = 1.0);

    template <class F> void visit(const std::string& prefix, F&& f) {
        f(prefix + ".weight", weight);
        f(prefix + ".bias", bias);
    }
    template <class F> void visit(const std::string& prefix, F&& f) const {
        f(prefix + ".weight", weight);
        f(prefix + ".bias", bias);
    }
};

/// Columns are independent inputs.
MatrixXd linear_forward(const Linear& l, const MatrixXd& x);
MatrixXd linear_backward(const Linear& l, const MatrixXd& x, const MatrixXd& dy, Linear* grad);

MatrixXd silu(const MatrixXd& x);
/// dL/dx given the pre-activation x and dL/dy.
MatrixXd silu_backward(const MatrixXd& x, const MatrixXd& dy);

/// y = x * (1 + gamma_b) + beta_b per channel and sample; `film` is
/// (2C x batch) with gamma in the first C rows.
FeatureMap film_forward(const FeatureMap& x, const MatrixXd& film);
/// Returns dL/dx; writes dL/dfilm.
FeatureMap film_backward(const FeatureMap& x, const MatrixXd& film, const FeatureMap& dy, MatrixXd* dfilm);

FeatureMap upsample2x(const FeatureMap& x);
FeatureMap upsample2x_backward(const FeatureMap& dy);

/// Scaled dot-product attention with a single head:
///   out = Wo (V softmax(Q^T K / sqrt(dk))^T),
///   Q = Wq q_in, K = Wk kv_in, V = Wv kv_in.
struct Attention {
    MatrixXd wq, wk, wv, wo;

    Attention() = default;
    Attention(int query_dim, int kv_dim, int inner_dim, Rng& rng, double out_gain = 1.0);

    template <class F> void visit(const std::string& prefix, F&& f) {
        f(prefix + ".wq", wq);
        f(prefix + ".wk", wk);
        f(prefix + ".wv", wv);
        f(prefix + ".wo", wo);
    }
    template <class F> void visit(const std::string& prefix, F&& f) const {
        f(prefix + ".wq", wq);
        f(prefix + ".wk", wk);
        f(prefix + ".wv", wv);
        f(prefix + ".wo", wo);
    }
};

struct AttentionCache {
    MatrixXd q_in, kv_in, q, k, v, a, o;
};

MatrixXd attention_forward(const Attention& w, const MatrixXd& q_in, const MatrixXd& kv_in,
                           AttentionCache* cache);
void attention_backward(const Attention& w, const AttentionCache& cache, const MatrixXd& dout,
                        Attention* grad, MatrixXd* dq_in, MatrixXd* dkv_in);

/// Sets every visited tensor of `p` to zeros of the same shape.
template <class P> void zero_like(P& p) {
    p.visit([](const std::string&, MatrixXd& m) { m.setZero(); });
}

}  // namespace lego::nn
