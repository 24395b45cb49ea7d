// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Brute-force references for cross-checking the main pipeline. Everything
// here is written with plain loops over std::vector and shares no helpers
// with the implementations it checks.

#include <functional>
#include <span>
#include <vector>

#include "divt/clustering.hpp"
#include "divt/similarity.hpp"
#include "divt/token_former.hpp"

namespace divt::oracle {

/// Literal transcription of the greedy centroid pass: count neighbours once,
/// stable-sort by count descending, then repeatedly take the head and drop
/// everything similar to it.
std::vector<Index> brute_force_centroids(const SimMatrix& sim, double theta);

/// Triple-loop masked cross-attention followed by the MLP.
TokenSequence naive_attention(const PatchSet& ps, const Clustering& cl, const TokenFormerParams& params);

/// Triple-loop K x N softmax weights.
std::vector<std::vector<double>> naive_attention_weights(const PatchSet& ps, const Clustering& cl,
                                                         const TokenFormerParams& params);

/// Central differences (f(p + eps e_i) - f(p - eps e_i)) / 2 eps for every coordinate.
/// Throws std::domain_error if the loss is non-finite at any probe.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss,
                                     std::vector<double> params, double eps);

/// Adjusted Rand index by explicit enumeration of all patch pairs.
double pair_counting_ari(std::span<const Index> a, std::span<const Index> b);

}  // namespace divt::oracle
