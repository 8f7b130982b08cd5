// Copyright 2026 The lego-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lego/inversion/context_loss.hpp"

#include <cmath>

#include "lego/core/error.hpp"

namespace lego::inversion {
namespace {

MatrixXd gather(const std::vector<std::string>& words, const core::Vocabulary& vocab,
                const core::EmbeddingTable& table) {
    MatrixXd m(table.dim(), static_cast<Eigen::Index>(words.size()));
    for (std::size_t k = 0; k < words.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = table.row(vocab.id(words[k]));
    return m;
}

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

ContextSets ContextSets::from_spec(const core::ConceptSpec& spec, const core::Vocabulary& vocab,
                                   const core::EmbeddingTable& table) {
    spec.validate(vocab);
    ContextSets s;
    for (int i = 0; i < spec.n; ++i) {
        s.positives.push_back(gather(spec.positives[static_cast<std::size_t>(i)], vocab, table));
        const auto& neg = spec.negatives.size() > static_cast<std::size_t>(i) ? spec.negatives[static_cast<std::size_t>(i)]
                                                                              : std::vector<std::string>{};
        s.negatives.push_back(gather(neg, vocab, table));
    }
    return s;
}

double context_loss(const MatrixXd& cpt, const ContextSets& sets, double temperature, MatrixXd* grad) {
    if (cpt.cols() != sets.size() || (!sets.negatives.empty() && sets.negatives.size() != sets.positives.size())) {
        throw UserError("context loss: token count does not match the context sets");
    }
    if (!(temperature > 0.0)) throw UserError("context loss: temperature must be > 0");
    if (grad) *grad = MatrixXd::Zero(cpt.rows(), cpt.cols());
    double total = 0.0;
    const MatrixXd none(cpt.rows(), 0);
    for (int i = 0; i < sets.size(); ++i) {
        const MatrixXd& p = sets.positives[static_cast<std::size_t>(i)];
        const MatrixXd& n = sets.negatives.empty() ? none : sets.negatives[static_cast<std::size_t>(i)];
        if (p.cols() == 0) throw UserError("context loss: positive set " + std::to_string(i + 1) + " is empty");
        if (p.rows() != cpt.rows() || (n.cols() > 0 && n.rows() != cpt.rows())) {
            throw UserError("context loss: embedding dimension mismatch");
        }
        const Eigen::VectorXd lp = (p.transpose() * cpt.col(i)) / temperature;
        Eigen::VectorXd all(lp.size() + n.cols());
        all.head(lp.size()) = lp;
        if (n.cols() > 0) all.tail(n.cols()) = (n.transpose() * cpt.col(i)) / temperature;
        if (n.cols() == 0) continue;  // the ratio is exactly one
        const double lse_all = log_sum_exp(all);
        const double lse_pos = log_sum_exp(lp);
        total += lse_all - lse_pos;
        if (grad) {
            const Eigen::VectorXd s_all = (all.array() - lse_all).exp();
            const Eigen::VectorXd s_pos = (lp.array() - lse_pos).exp();
            const Eigen::VectorXd dpos = s_all.head(lp.size()) - s_pos;
            const Eigen::VectorXd dneg = s_all.tail(n.cols());
            grad->col(i) = (p * dpos + n * dneg) / temperature;
        }
    }
    return total;
}

}  // namespace lego::inversion
