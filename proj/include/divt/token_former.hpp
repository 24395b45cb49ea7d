// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "divt/clustering.hpp"
#include "divt/embedding_io.hpp"
#include "divt/types.hpp"

namespace divt {

enum class ScalePolicy : std::uint32_t {
    kScaled = 0,    // logits multiplied by 1/sqrt(d_att)
    kUnscaled = 1,  // raw dot products
};

struct TokenFormerDims {
    Index d = 0;         // input embedding width
    Index d_att = 0;     // query/key/value width
    Index d_hidden = 0;  // MLP hidden width
    Index d_out = 0;     // token width
    Index n_max = 576;   // positional table rows
};

/// Learnable state of the cluster-pooling projector.
///
/// Queries come from the cluster centroid, keys from every member patch and
/// values from member patch + positional embedding. The pooled value goes
/// through Linear(d_att, d_hidden) -> GELU -> Linear(d_hidden, d_out).
struct TokenFormerParams {
    Matrix w_q;        // d_att x d
    Matrix w_k;        // d_att x d
    Matrix w_v;        // d_att x d
    Matrix pos_table;  // n_max x d, row i belongs to grid position i
    Matrix w1;         // d_hidden x d_att
    Vector b1;         // d_hidden
    Matrix w2;         // d_out x d_hidden
    Vector b2;         // d_out
    ScalePolicy scale_policy = ScalePolicy::kScaled;

    TokenFormerDims dims() const;
    double logit_scale() const;
    Index num_scalars() const;

    /// Shape consistency and finiteness.
    void validate() const;

    /// Same shapes, all zeros. Used as a gradient accumulator.
    TokenFormerParams zeros_like() const;

    /// Parameters in declared order: w_q, w_k, w_v, pos_table, w1, b1, w2, b2.
    std::vector<double> flatten() const;
    void assign_flat(std::span<const double> values);
};

/// Weights and positional rows ~ N(0, weight_std^2), biases zero.
TokenFormerParams init_params(const TokenFormerDims& dims, std::uint64_t seed, double weight_std = 0.02,
                              ScalePolicy scale_policy = ScalePolicy::kScaled);

/// Dense K x N membership; mask(k, i) is true iff patch i is in cluster k.
struct AttentionMask {
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask;

    static AttentionMask from_clustering(const Clustering& cl);
};

struct TokenSequence {
    Matrix tokens;                 // K x d_out, row k pooled from cluster k
    std::vector<Index> centroids;  // provenance: centroid patch of each row

    Index k() const { return tokens.rows(); }
};

TokenSequence form_tokens(const PatchSet& ps, const Clustering& cl, const TokenFormerParams& params);

/// K x N softmax weights; row k is supported on cluster k and sums to 1.
Matrix attention_weights(const PatchSet& ps, const Clustering& cl, const TokenFormerParams& params);

struct TokenFormerGrads {
    TokenFormerParams params;  // d loss / d parameter, same layout as the parameters
    Matrix inputs;             // d loss / d ps.data
};

/// Exact gradients of <upstream, form_tokens(ps, cl, params)>. The clustering
/// is held fixed and carries no gradient.
TokenFormerGrads backward(const PatchSet& ps, const Clustering& cl, const TokenFormerParams& params,
                          const Matrix& upstream);

/// GELU(x) = x * Phi(x), erf form.
double gelu(double x);
double gelu_grad(double x);

/// "DIVP" checkpoint: magic, version u32, scale_policy u32, d, d_att, d_hidden,
/// d_out, n_max as u32, then the flattened parameters as little-endian f64.
std::vector<std::byte> encode_params(const TokenFormerParams& params);
TokenFormerParams decode_params(std::span<const std::byte> bytes);
void save_params(const TokenFormerParams& params, const std::filesystem::path& path);
TokenFormerParams load_params(const std::filesystem::path& path);

}  // namespace divt
