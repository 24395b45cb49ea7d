// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "divt/embedding_io.hpp"
#include "divt/types.hpp"

namespace divt {

/// Symmetric cosine-similarity matrix with a unit diagonal.
struct SimMatrix {
    Matrix values;

    Index size() const { return values.rows(); }
    double operator()(Index i, Index j) const { return values(i, j); }
};

/// S_ij = <x_i, x_j> / (|x_i| |x_j|). A zero row has similarity 0 to every
/// other row and 1 to itself. The upper triangle is mirrored so S is exactly
/// symmetric.
SimMatrix cosine_matrix(const Matrix& rows);
SimMatrix cosine_matrix(const PatchSet& ps);

/// n_i = #{ j : S_ij > theta }, j ranging over all indices including i.
std::vector<Index> neighbor_degrees(const SimMatrix& sim, double theta);

/// Mean cosine over the M(M-1)/2 unordered pairs of rows. Requires M >= 2.
double mean_pairwise_similarity(const Matrix& rows);

struct LayerSimilarity {
    int layer = 0;
    double mean_similarity = 0.0;
    double stddev = 0.0;  // population std over images; 0 for a single image
};

std::vector<LayerSimilarity> layerwise_similarity_profile(const LayerwiseEmbeddings& le);

/// Per-layer mean similarity averaged over images.
std::vector<LayerSimilarity> layerwise_similarity_profile(std::span<const LayerwiseEmbeddings> corpus);

}  // namespace divt
