// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/nn/layers.hpp"

#include <cmath>

namespace lego::nn {
namespace {

MatrixXd gaussian(int rows, int cols, double stddev, Rng& rng) {
    MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j) {
        for (int i = 0; i < rows; ++i) m(i, j) = stddev * rng.normal();
    }
    return m;
}

}  // namespace

Conv2d::Conv2d(int cin, int cout, int s, Rng& rng, double gain)
    : weight(gaussian(cout, cin * 9, gain * std::sqrt(2.0 / (cin * 9)), rng)),
      bias(MatrixXd::Zero(cout, 1)),
      stride(s) {}

namespace {

// Column layout: row k*cin + c holds input channel c at kernel offset k.
void im2col(const FeatureMap& x, int b, int stride, int ho, int wo, MatrixXd& cols) {
    const int cin = x.channels();
    cols.resize(cin * 9, ho * wo);
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            const Eigen::Index col = oy * wo + ox;
            for (int ky = 0; ky < 3; ++ky) {
                const int iy = oy * stride + ky - 1;
                for (int kx = 0; kx < 3; ++kx) {
                    const int ix = ox * stride + kx - 1;
                    auto dst = cols.block((ky * 3 + kx) * cin, col, cin, 1);
                    if (iy < 0 || iy >= x.height || ix < 0 || ix >= x.width) {
                        dst.setZero();
                    } else {
                        dst = x.data.col(static_cast<Eigen::Index>(b) * x.plane() + iy * x.width + ix);
                    }
                }
            }
        }
    }
}

void col2im_add(const MatrixXd& dcols, int b, int stride, int ho, int wo, FeatureMap& dx) {
    const int cin = dx.channels();
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            const Eigen::Index col = oy * wo + ox;
            for (int ky = 0; ky < 3; ++ky) {
                const int iy = oy * stride + ky - 1;
                if (iy < 0 || iy >= dx.height) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const int ix = ox * stride + kx - 1;
                    if (ix < 0 || ix >= dx.width) continue;
                    dx.data.col(static_cast<Eigen::Index>(b) * dx.plane() + iy * dx.width + ix) +=
                        dcols.block((ky * 3 + kx) * cin, col, cin, 1);
                }
            }
        }
    }
}

}  // namespace

FeatureMap conv_forward(const Conv2d& conv, const FeatureMap& x, ConvCache* cache) {
    const int s = conv.stride;
    const int ho = (x.height - 1) / s + 1;
    const int wo = (x.width - 1) / s + 1;
    const int plane_out = ho * wo;
    FeatureMap y;
    y.batch = x.batch;
    y.height = ho;
    y.width = wo;
    y.data.resize(conv.out_channels(), static_cast<Eigen::Index>(x.batch) * plane_out);
    MatrixXd cols;
    for (int b = 0; b < x.batch; ++b) {
        im2col(x, b, s, ho, wo, cols);
        y.data.middleCols(static_cast<Eigen::Index>(b) * plane_out, plane_out).noalias() = conv.weight * cols;
    }
    y.data.colwise() += conv.bias.col(0);
    if (cache) cache->input = x;
    return y;
}

FeatureMap conv_backward(const Conv2d& conv, const ConvCache& cache, const FeatureMap& dy,
                         Conv2d* grad, bool want_dx) {
    const FeatureMap& x = cache.input;
    const int s = conv.stride;
    const int ho = dy.height, wo = dy.width;
    const int plane_out = ho * wo;
    FeatureMap dx;
    if (want_dx) {
        dx.batch = x.batch;
        dx.height = x.height;
        dx.width = x.width;
        dx.data = MatrixXd::Zero(x.channels(), x.data.cols());
    }
    if (grad) grad->bias.col(0) += dy.data.rowwise().sum();
    MatrixXd cols;
    MatrixXd dcols;
    for (int b = 0; b < x.batch; ++b) {
        const auto dyb = dy.data.middleCols(static_cast<Eigen::Index>(b) * plane_out, plane_out);
        if (grad) {
            im2col(x, b, s, ho, wo, cols);
            grad->weight.noalias() += dyb * cols.transpose();
        }
        if (want_dx) {
            dcols.noalias() = conv.weight.transpose() * dyb;
            col2im_add(dcols, b, s, ho, wo, dx);
        }
    }
    return dx;
}

Linear::Linear(int in, int out, Rng& rng, double gain)
    : weight(gaussian(out, in, gain * std::sqrt(1.0 / in), rng)), bias(MatrixXd::Zero(out, 1)) {}

MatrixXd linear_forward(const Linear& l, const MatrixXd& x) {
    MatrixXd y = l.weight * x;
    y.colwise() += l.bias.col(0);
    return y;
}

MatrixXd linear_backward(const Linear& l, const MatrixXd& x, const MatrixXd& dy, Linear* grad) {
    if (grad) {
        grad->weight.noalias() += dy * x.transpose();
        grad->bias.col(0) += dy.rowwise().sum();
    }
    return l.weight.transpose() * dy;
}

MatrixXd silu(const MatrixXd& x) {
    return x.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

MatrixXd silu_backward(const MatrixXd& x, const MatrixXd& dy) {
    return x.binaryExpr(dy, [](double v, double g) {
        const double sig = 1.0 / (1.0 + std::exp(-v));
        return g * sig * (1.0 + v * (1.0 - sig));
    });
}

FeatureMap film_forward(const FeatureMap& x, const MatrixXd& film) {
    const int c = x.channels();
    const int plane = x.plane();
    FeatureMap y = x;
    for (int b = 0; b < x.batch; ++b) {
        auto block = y.data.middleCols(static_cast<Eigen::Index>(b) * plane, plane);
        const VectorXd scale = (film.col(b).head(c).array() + 1.0).matrix();
        block = scale.asDiagonal() * block;
        block.colwise() += film.col(b).tail(c);
    }
    return y;
}

FeatureMap film_backward(const FeatureMap& x, const MatrixXd& film, const FeatureMap& dy, MatrixXd* dfilm) {
    const int c = x.channels();
    const int plane = x.plane();
    FeatureMap dx = dy;
    dfilm->resize(2 * c, x.batch);
    for (int b = 0; b < x.batch; ++b) {
        const Eigen::Index off = static_cast<Eigen::Index>(b) * plane;
        const auto g = dy.data.middleCols(off, plane);
        const auto xin = x.data.middleCols(off, plane);
        dfilm->col(b).head(c) = g.cwiseProduct(xin).rowwise().sum();
        dfilm->col(b).tail(c) = g.rowwise().sum();
        const VectorXd scale = (film.col(b).head(c).array() + 1.0).matrix();
        dx.data.middleCols(off, plane) = scale.asDiagonal() * g;
    }
    return dx;
}

FeatureMap upsample2x(const FeatureMap& x) {
    FeatureMap y;
    y.batch = x.batch;
    y.height = x.height * 2;
    y.width = x.width * 2;
    y.data.resize(x.channels(), static_cast<Eigen::Index>(y.batch) * y.plane());
    for (int b = 0; b < x.batch; ++b) {
        for (int yy = 0; yy < y.height; ++yy) {
            for (int xx = 0; xx < y.width; ++xx) {
                y.data.col(static_cast<Eigen::Index>(b) * y.plane() + yy * y.width + xx) =
                    x.data.col(static_cast<Eigen::Index>(b) * x.plane() + (yy / 2) * x.width + xx / 2);
            }
        }
    }
    return y;
}

FeatureMap upsample2x_backward(const FeatureMap& dy) {
    FeatureMap dx;
    dx.batch = dy.batch;
    dx.height = dy.height / 2;
    dx.width = dy.width / 2;
    dx.data = MatrixXd::Zero(dy.channels(), static_cast<Eigen::Index>(dx.batch) * dx.plane());
    for (int b = 0; b < dy.batch; ++b) {
        for (int yy = 0; yy < dy.height; ++yy) {
            for (int xx = 0; xx < dy.width; ++xx) {
                dx.data.col(static_cast<Eigen::Index>(b) * dx.plane() + (yy / 2) * dx.width + xx / 2) +=
                    dy.data.col(static_cast<Eigen::Index>(b) * dy.plane() + yy * dy.width + xx);
            }
        }
    }
    return dx;
}

Attention::Attention(int query_dim, int kv_dim, int inner_dim, Rng& rng, double out_gain)
    : wq(gaussian(inner_dim, query_dim, std::sqrt(1.0 / query_dim), rng)),
      wk(gaussian(inner_dim, kv_dim, std::sqrt(1.0 / kv_dim), rng)),
      wv(gaussian(inner_dim, kv_dim, std::sqrt(1.0 / kv_dim), rng)),
      wo(gaussian(query_dim, inner_dim, out_gain * std::sqrt(1.0 / inner_dim), rng)) {}

MatrixXd attention_forward(const Attention& w, const MatrixXd& q_in, const MatrixXd& kv_in,
                           AttentionCache* cache) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.wq.rows()));
    MatrixXd q = w.wq * q_in;
    MatrixXd k = w.wk * kv_in;
    MatrixXd v = w.wv * kv_in;
    MatrixXd a = (q.transpose() * k) * scale;  // queries x keys
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double m = a.row(i).maxCoeff();
        a.row(i) = (a.row(i).array() - m).exp();
        a.row(i) /= a.row(i).sum();
    }
    MatrixXd o = v * a.transpose();
    MatrixXd out = w.wo * o;
    if (cache) {
        cache->q_in = q_in;
        cache->kv_in = kv_in;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->a = std::move(a);
        cache->o = std::move(o);
    }
    return out;
}

void attention_backward(const Attention& w, const AttentionCache& c, const MatrixXd& dout,
                        Attention* grad, MatrixXd* dq_in, MatrixXd* dkv_in) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.wq.rows()));
    const MatrixXd d_o = w.wo.transpose() * dout;
    const MatrixXd dv = d_o * c.a;
    const MatrixXd da = d_o.transpose() * c.v;
    MatrixXd ds = c.a.cwiseProduct(da);
    const VectorXd row_dot = ds.rowwise().sum();
    ds = c.a.cwiseProduct(da.colwise() - row_dot) * scale;
    const MatrixXd dq = c.k * ds.transpose();
    const MatrixXd dk = c.q * ds;
    if (grad) {
        grad->wo.noalias() += dout * c.o.transpose();
        grad->wv.noalias() += dv * c.kv_in.transpose();
        grad->wq.noalias() += dq * c.q_in.transpose();
        grad->wk.noalias() += dk * c.kv_in.transpose();
    }
    if (dq_in) *dq_in = w.wq.transpose() * dq;
    if (dkv_in) *dkv_in = w.wk.transpose() * dk + w.wv.transpose() * dv;
}

}  // namespace lego::nn
