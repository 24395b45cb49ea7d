// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "divt/clustering.hpp"
#include "divt/errors.hpp"
#include "divt/token_former.hpp"

namespace divt {

enum class TargetMode {
    kClusterMean,     // target_k = A * mean(x_i : i in cluster k), A fixed random
    kTeacherPooling,  // target_k = token from a fixed random teacher projector
};

/// Regression target for the stand-in training objective.
struct SurrogateTarget {
    TargetMode mode = TargetMode::kClusterMean;
    Matrix map;                      // d_out x d, cluster-mean mode
    TokenFormerParams teacher;       // teacher-pooling mode
};

/// Deterministic target. `map` entries ~ N(0, 1/d).
SurrogateTarget make_surrogate_target(const TokenFormerDims& dims, TargetMode mode, std::uint64_t seed);

Matrix surrogate_targets(const PatchSet& ps, const Clustering& cl, const SurrogateTarget& target);

/// Mean over tokens of the squared L2 distance to the target token.
double surrogate_loss(const TokenSequence& tokens, const PatchSet& ps, const Clustering& cl,
                      const SurrogateTarget& target);

/// d surrogate_loss / d tokens.
Matrix surrogate_loss_grad(const TokenSequence& tokens, const PatchSet& ps, const Clustering& cl,
                           const SurrogateTarget& target);

struct TrainConfig {
    int steps = 100;
    double learning_rate = 1e-2;
    int batch_size = 0;                  // 0 or >= corpus size means full batch
    std::vector<double> thetas{0.65};    // one entry: fixed theta
    bool randomize_theta = false;        // draw theta uniformly from `thetas` per image per step
    std::uint64_t seed = 0;
    TargetMode target_mode = TargetMode::kClusterMean;

    void validate() const;
};

struct FitResult {
    TokenFormerParams params;
    std::vector<double> loss_trace;  // batch loss before the update at each step
    SurrogateTarget target;          // the objective that was fitted
};

/// Non-finite loss during fit.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(int step, const std::string& what) : Error(what), m_step(step) {}
    int step() const { return m_step; }

private:
    int m_step;
};

/// Clusterings keyed on (image index, theta); clustering depends only on the frozen inputs.
class ClusterCache {
public:
    explicit ClusterCache(std::span<const PatchSet> corpus) : m_corpus(corpus) {}
    const Clustering& get(std::size_t image, double theta);

private:
    std::span<const PatchSet> m_corpus;
    std::map<std::pair<std::size_t, double>, Clustering> m_cache;
};

/// Target used by fit for this config; derived from cfg.seed.
SurrogateTarget training_target(const TrainConfig& cfg, const TokenFormerDims& dims);

/// Plain gradient descent on the surrogate objective.
FitResult fit(std::span<const PatchSet> corpus, const TrainConfig& cfg, TokenFormerParams params);

/// Mean surrogate loss over the corpus at a fixed theta.
double evaluate_loss(std::span<const PatchSet> corpus, const TokenFormerParams& params,
                     const SurrogateTarget& target, double theta);

}  // namespace divt
