// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#include "divt/training.hpp"

#include <cmath>
#include <string>

#include "divt/parallel.hpp"
#include "divt/random.hpp"

namespace divt {

namespace {

constexpr double kTeacherWeightStd = 0.3;

void check_token_shape(const TokenSequence& tokens, const Clustering& cl, const Matrix& targets) {
    if (tokens.k() != cl.k() || tokens.tokens.cols() != targets.cols()) {
        throw ParameterError("tokens are " + std::to_string(tokens.k()) + "x" + std::to_string(tokens.tokens.cols()) +
                             " but targets are " + std::to_string(targets.rows()) + "x" +
                             std::to_string(targets.cols()));
    }
}

}  // namespace

SurrogateTarget make_surrogate_target(const TokenFormerDims& dims, TargetMode mode, std::uint64_t seed) {
    SurrogateTarget t;
    t.mode = mode;
    if (mode == TargetMode::kClusterMean) {
        Rng rng(seed);
        t.map.resize(dims.d_out, dims.d);
        const double std = 1.0 / std::sqrt(static_cast<double>(dims.d));
        for (Index i = 0; i < t.map.size(); ++i) t.map.data()[i] = rng.normal(0.0, std);
    } else {
        t.teacher = init_params(dims, seed, kTeacherWeightStd);
    }
    return t;
}

Matrix surrogate_targets(const PatchSet& ps, const Clustering& cl, const SurrogateTarget& target) {
    if (target.mode == TargetMode::kTeacherPooling) {
        return form_tokens(ps, cl, target.teacher).tokens;
    }
    if (target.map.cols() != ps.dim()) {
        throw ParameterError("target map expects width " + std::to_string(target.map.cols()) + ", patches have " +
                             std::to_string(ps.dim()));
    }
    Matrix means = Matrix::Zero(cl.k(), ps.dim());
    std::vector<double> counts(static_cast<std::size_t>(cl.k()), 0.0);
    for (Index i = 0; i < ps.n_patches(); ++i) {
        const Index k = cl.assignment[static_cast<std::size_t>(i)];
        means.row(k) += ps.data.row(i);
        counts[static_cast<std::size_t>(k)] += 1.0;
    }
    for (Index k = 0; k < cl.k(); ++k) means.row(k) /= counts[static_cast<std::size_t>(k)];
    return means * target.map.transpose();
}

double surrogate_loss(const TokenSequence& tokens, const PatchSet& ps, const Clustering& cl,
                      const SurrogateTarget& target) {
    const Matrix y = surrogate_targets(ps, cl, target);
    check_token_shape(tokens, cl, y);
    return (tokens.tokens - y).rowwise().squaredNorm().sum() / static_cast<double>(cl.k());
}

Matrix surrogate_loss_grad(const TokenSequence& tokens, const PatchSet& ps, const Clustering& cl,
                           const SurrogateTarget& target) {
    const Matrix y = surrogate_targets(ps, cl, target);
    check_token_shape(tokens, cl, y);
    return (2.0 / static_cast<double>(cl.k())) * (tokens.tokens - y);
}

void TrainConfig::validate() const {
    if (steps < 1) throw ParameterError("steps must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ParameterError("learning rate must be finite and >= 0");
    }
    if (batch_size < 0) throw ParameterError("batch size must be >= 0");
    if (thetas.empty()) throw ParameterError("theta set is empty");
    for (double t : thetas) GranularityConfig{t}.validate();
}

const Clustering& ClusterCache::get(std::size_t image, double theta) {
    const auto key = std::make_pair(image, theta);
    auto it = m_cache.find(key);
    if (it == m_cache.end()) {
        it = m_cache.emplace(key, cluster(m_corpus[image], GranularityConfig{theta})).first;
    }
    return it->second;
}

SurrogateTarget training_target(const TrainConfig& cfg, const TokenFormerDims& dims) {
    return make_surrogate_target(dims, cfg.target_mode, mix_seed(cfg.seed, 1));
}

FitResult fit(std::span<const PatchSet> corpus, const TrainConfig& cfg, TokenFormerParams params) {
    cfg.validate();
    params.validate();
    if (corpus.empty()) throw ParameterError("training corpus is empty");

    const auto target = training_target(cfg, params.dims());
    Rng theta_rng(mix_seed(cfg.seed, 2));
    ClusterCache cache(corpus);

    const std::size_t n = corpus.size();
    const std::size_t batch =
        (cfg.batch_size == 0 || static_cast<std::size_t>(cfg.batch_size) >= n) ? n : cfg.batch_size;

    FitResult result;
    result.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));
    std::vector<double> flat = params.flatten();

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<std::size_t> images(batch);
        std::vector<const Clustering*> clusterings(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            images[b] = (static_cast<std::size_t>(step) * batch + b) % n;
            const double theta =
                cfg.randomize_theta ? cfg.thetas[theta_rng.below(cfg.thetas.size())] : cfg.thetas.front();
            clusterings[b] = &cache.get(images[b], theta);
        }

        std::vector<double> losses(batch, 0.0);
        std::vector<std::vector<double>> grads(batch);
        parallel_for(batch, [&](std::size_t b) {
            const auto& ps = corpus[images[b]];
            const auto& cl = *clusterings[b];
            const auto tokens = form_tokens(ps, cl, params);
            losses[b] = surrogate_loss(tokens, ps, cl, target);
            const Matrix upstream = surrogate_loss_grad(tokens, ps, cl, target) / static_cast<double>(batch);
            grads[b] = backward(ps, cl, params, upstream).params.flatten();
        });

        double loss = 0.0;
        for (double l : losses) loss += l;
        loss /= static_cast<double>(batch);
        if (!std::isfinite(loss)) {
            throw TrainingDiverged(step, "training diverged at step " + std::to_string(step));
        }
        result.loss_trace.push_back(loss);

        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= cfg.learning_rate * grads[b][i];
        }
        params.assign_flat(flat);
    }
    result.params = std::move(params);
    result.target = target;
    return result;
}

double evaluate_loss(std::span<const PatchSet> corpus, const TokenFormerParams& params,
                     const SurrogateTarget& target, double theta) {
    if (corpus.empty()) throw ParameterError("evaluation corpus is empty");
    std::vector<double> losses(corpus.size(), 0.0);
    parallel_for(corpus.size(), [&](std::size_t i) {
        const auto cl = cluster(corpus[i], GranularityConfig{theta});
        losses[i] = surrogate_loss(form_tokens(corpus[i], cl, params), corpus[i], cl, target);
    });
    double total = 0.0;
    for (double l : losses) total += l;
    return total / static_cast<double>(corpus.size());
}

}  // namespace divt
