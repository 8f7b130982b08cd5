// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/diffusion/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lego/core/config.hpp"
#include "lego/core/error.hpp"
#include "lego/diffusion/loss.hpp"

namespace lego::diffusion {

void BackboneConfig::validate() const {
    if (dims.cond_dim < 2 || dims.c1 < 1 || dims.c2 < 1 || dims.c3 < 1 || dims.hidden < 1 || dims.attn_dim < 1 ||
        dims.time_dim < 2 || dims.time_dim % 2 != 0) {
        throw UserError("backbone: invalid network dimensions");
    }
    if (max_len < 2) throw UserError("backbone: max_len must be >= 2");
    if (pseudo_count < 1) throw UserError("backbone: pseudo_count must be >= 1");
    if (steps < 0) throw UserError("backbone: steps must be >= 0");
    if (batch_size < 1) throw UserError("backbone: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw UserError("backbone: learning_rate must be > 0");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw UserError("backbone: ema_decay must lie in [0, 1)");
    if (!(caption_dropout >= 0.0 && caption_dropout < 1.0)) throw UserError("backbone: caption_dropout must lie in [0, 1)");
    if (!(grad_clip > 0.0)) throw UserError("backbone: grad_clip must be > 0");
    if (validation_images < 1) throw UserError("backbone: validation_images must be >= 1");
    if (!(required_ratio > 0.0 && required_ratio <= 1.0)) throw UserError("backbone: required_ratio must lie in (0, 1]");
    if (log_every < 1) throw UserError("backbone: log_every must be >= 1");
    NoiseSchedule::linear(timesteps, beta_start, beta_end);
}

nlohmann::json BackboneConfig::to_json() const {
    return {{"dims", dims.to_json()},
            {"max_len", max_len},
            {"timesteps", timesteps},
            {"beta_start", beta_start},
            {"beta_end", beta_end},
            {"pseudo_count", pseudo_count},
            {"words", words},
            {"embedding_scale", embedding_scale},
            {"steps", steps},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"warmup", warmup},
            {"grad_clip", grad_clip},
            {"ema_decay", ema_decay},
            {"caption_dropout", caption_dropout},
            {"seed", seed},
            {"validation_images", validation_images},
            {"required_ratio", required_ratio},
            {"log_every", log_every}};
}

BackboneConfig BackboneConfig::from_json(const nlohmann::json& j) {
    core::reject_unknown_keys(j, {"dims", "max_len", "timesteps", "beta_start", "beta_end", "pseudo_count", "words",
                                  "embedding_scale", "steps", "batch_size", "learning_rate", "warmup", "grad_clip",
                                  "ema_decay", "caption_dropout", "seed", "validation_images", "required_ratio",
                                  "log_every"},
                              "backbone");
    BackboneConfig c;
    try {
        if (j.contains("dims")) {
            const auto& d = j.at("dims");
            core::reject_unknown_keys(d, {"c1", "c2", "c3", "hidden", "time_dim", "cond_dim", "attn_dim"},
                                      "backbone.dims");
            c.dims.c1 = d.value("c1", c.dims.c1);
            c.dims.c2 = d.value("c2", c.dims.c2);
            c.dims.c3 = d.value("c3", c.dims.c3);
            c.dims.hidden = d.value("hidden", c.dims.hidden);
            c.dims.time_dim = d.value("time_dim", c.dims.time_dim);
            c.dims.cond_dim = d.value("cond_dim", c.dims.cond_dim);
            c.dims.attn_dim = d.value("attn_dim", c.dims.attn_dim);
        }
        c.max_len = j.value("max_len", c.max_len);
        c.timesteps = j.value("timesteps", c.timesteps);
        c.beta_start = j.value("beta_start", c.beta_start);
        c.beta_end = j.value("beta_end", c.beta_end);
        c.pseudo_count = j.value("pseudo_count", c.pseudo_count);
        c.words = j.value("words", c.words);
        c.embedding_scale = j.value("embedding_scale", c.embedding_scale);
        c.steps = j.value("steps", c.steps);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.warmup = j.value("warmup", c.warmup);
        c.grad_clip = j.value("grad_clip", c.grad_clip);
        c.ema_decay = j.value("ema_decay", c.ema_decay);
        c.caption_dropout = j.value("caption_dropout", c.caption_dropout);
        c.seed = j.value("seed", c.seed);
        c.validation_images = j.value("validation_images", c.validation_images);
        c.required_ratio = j.value("required_ratio", c.required_ratio);
        c.log_every = j.value("log_every", c.log_every);
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("backbone: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

struct Slot {
    Eigen::MatrixXd* param;
    Eigen::MatrixXd* grad;
    Eigen::MatrixXd m, v, ema;
};

struct Grads {
    DenoiserParams denoiser;
    textenc::TextEncoderParams encoder;
    Eigen::MatrixXd embeddings;

    template <class F> void visit(F&& f) {
        f("embeddings", embeddings);
        encoder.visit(f);
        denoiser.visit(f);
    }
};

std::vector<std::vector<int>> tokenize_all(std::span<const CaptionedImage> corpus, const Backbone& b) {
    std::vector<std::vector<int>> out;
    out.reserve(corpus.size());
    for (const auto& item : corpus) {
        std::vector<int> ids = b.vocab.tokenize(item.caption);
        if (ids.empty()) throw UserError("empty caption");
        if (static_cast<int>(ids.size()) > b.encoder.max_len()) {
            throw UserError("caption longer than max_len: '" + item.caption + "'");
        }
        for (int id : ids) {
            if (b.vocab.is_pseudo(id)) throw UserError("caption uses a pseudo-token: '" + item.caption + "'");
        }
        out.push_back(std::move(ids));
    }
    return out;
}

}  // namespace

double validation_loss(const Backbone& backbone, std::span<const CaptionedImage> images, std::uint64_t seed,
                       int draws) {
    if (images.empty()) throw UserError("validation set is empty");
    const auto tokens = tokenize_all(images, backbone);
    double total = 0.0;
    int count = 0;
    Rng rng(seed);
    constexpr std::size_t kChunk = 16;
    for (int d = 0; d < draws; ++d) {
        for (std::size_t start = 0; start < images.size(); start += kChunk) {
            const std::size_t n = std::min(kChunk, images.size() - start);
            std::vector<core::Image> batch;
            for (std::size_t i = 0; i < n; ++i) batch.push_back(images[start + i].image);
            const nn::FeatureMap x0 = to_feature_map(batch);
            const NoiseDraw draw = draw_noise(x0, backbone.schedule, rng);
            total += ldm_loss(backbone, backbone.table, x0,
                              std::span<const std::vector<int>>(tokens.data() + start, n), draw) *
                     static_cast<double>(n);
            count += static_cast<int>(n);
        }
    }
    return total / count;
}

Backbone train_backbone(std::span<const CaptionedImage> corpus, const BackboneConfig& config,
                        const std::function<void(const TrainLogEntry&)>& on_log, const Backbone* resume) {
    config.validate();
    if (resume && config.steps == 0) return *resume;
    if (static_cast<int>(corpus.size()) <= config.validation_images) {
        throw UserError("corpus must hold more images than the validation split");
    }

    Backbone b;
    if (resume) {
        b = *resume;
    } else {
        Rng init(derive_seed(config.seed, "init"));
        b.schedule = NoiseSchedule::linear(config.timesteps, config.beta_start, config.beta_end);
        b.vocab = core::Vocabulary::build(config.words.empty() ? core::default_word_list() : config.words,
                                          config.pseudo_count);
        b.table = core::EmbeddingTable::random(b.vocab, config.dims.cond_dim, init, config.embedding_scale);
        b.encoder = textenc::TextEncoderParams(config.dims.cond_dim, config.max_len, init);
        b.denoiser = DenoiserParams(config.dims, init);
    }
    b.encoder.frozen = false;

    // Every k-th image goes to validation.
    const std::size_t stride = corpus.size() / static_cast<std::size_t>(config.validation_images);
    std::vector<CaptionedImage> val;
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (i % stride == 0 && static_cast<int>(val.size()) < config.validation_images) {
            val.push_back(corpus[i]);
        } else {
            train_idx.push_back(i);
        }
    }
    const auto tokens = tokenize_all(corpus, b);
    const std::uint64_t val_seed = derive_seed(config.seed, "validation");
    const double initial_val = validation_loss(b, val, val_seed);

    Grads g;
    g.denoiser = b.denoiser;
    g.encoder = b.encoder;
    g.embeddings = b.table.matrix();
    std::vector<Slot> slots;
    b.visit([&](const std::string&, Eigen::MatrixXd& m) {
        slots.push_back({&m, nullptr, Eigen::MatrixXd::Zero(m.rows(), m.cols()), Eigen::MatrixXd::Zero(m.rows(), m.cols()), m});
    });
    std::size_t gi = 0;
    g.visit([&](const std::string&, Eigen::MatrixXd& m) { slots[gi++].grad = &m; });

    Rng rng(derive_seed(config.seed, "train"));
    const int null_id = b.null_token();
    const core::IdRange band = b.vocab.pseudo_band();
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    double smoothed = -1.0;
    double reference = -1.0;
    int bad_steps = 0;
    for (int step = 1; step <= config.steps; ++step) {
        for (auto& s : slots) s.grad->setZero();
        std::vector<core::Image> images;
        std::vector<std::vector<int>> prompts;
        for (int k = 0; k < config.batch_size; ++k) {
            const std::size_t i = train_idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(train_idx.size()) - 1))];
            images.push_back(corpus[i].image);
            prompts.push_back(rng.bernoulli(config.caption_dropout) ? std::vector<int>{null_id} : tokens[i]);
        }
        const nn::FeatureMap x0 = to_feature_map(images);
        const NoiseDraw draw = draw_noise(x0, b.schedule, rng);
        LossGrads lg{&g.denoiser, &g.encoder, &g.embeddings};
        const double loss = ldm_loss(b, b.table, x0, prompts, draw, &lg);
        if (!std::isfinite(loss)) throw NumericalError("backbone loss became non-finite at step " + std::to_string(step));
        g.embeddings.middleCols(band.begin, band.size()).setZero();

        double norm2 = 0.0;
        for (const auto& s : slots) norm2 += s.grad->squaredNorm();
        const double norm = std::sqrt(norm2);
        if (!std::isfinite(norm)) throw NumericalError("backbone gradient became non-finite at step " + std::to_string(step));
        const double clip = norm > config.grad_clip ? config.grad_clip / norm : 1.0;
        const double warm = config.warmup > 0 ? std::min(1.0, static_cast<double>(step) / config.warmup) : 1.0;
        const double lr = config.learning_rate * warm;
        const double c1 = 1.0 - std::pow(kBeta1, step);
        const double c2 = 1.0 - std::pow(kBeta2, step);
        for (auto& s : slots) {
            const Eigen::MatrixXd gr = clip * *s.grad;
            s.m = kBeta1 * s.m + (1.0 - kBeta1) * gr;
            s.v = kBeta2 * s.v + (1.0 - kBeta2) * gr.cwiseProduct(gr);
            s.param->array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + kEps);
            s.ema = config.ema_decay * s.ema + (1.0 - config.ema_decay) * *s.param;
        }

        smoothed = smoothed < 0.0 ? loss : 0.98 * smoothed + 0.02 * loss;
        if (step == std::min(config.steps, 50)) reference = smoothed;
        if (reference > 0.0 && smoothed > 10.0 * reference) {
            if (++bad_steps >= 100) throw NumericalError("backbone training diverged");
        } else {
            bad_steps = 0;
        }
        if (on_log && (step % config.log_every == 0 || step == config.steps)) on_log({step, smoothed});
    }
    for (auto& s : slots) *s.param = s.ema;
    b.table.mutable_matrix().middleCols(band.begin, band.size()).setZero();
    round_to_float32(b);
    b.encoder.frozen = true;

    const double final_val = validation_loss(b, val, val_seed);
    b.info = {{"config", config.to_json()},
              {"initial_validation_loss", initial_val},
              {"final_validation_loss", final_val},
              {"train_images", train_idx.size()},
              {"validation_images", val.size()}};
    if (resume) b.info["resumed_from"] = resume->frozen_hash();
    if (!(final_val <= config.required_ratio * initial_val)) {
        throw NumericalError("validation loss " + std::to_string(final_val) + " did not fall below " +
                             std::to_string(config.required_ratio) + " x " + std::to_string(initial_val));
    }
    return b;
}

}  // namespace lego::diffusion
