// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#include "divt/similarity.hpp"

#include <cmath>
#include <string>

#include "divt/errors.hpp"

namespace divt {

namespace {

// Rows scaled to unit length; zero rows stay zero.
Matrix unit_rows(const Matrix& rows) {
    Matrix out = rows;
    for (Index i = 0; i < out.rows(); ++i) {
        const double norm = out.row(i).norm();
        if (norm > 0.0) out.row(i) /= norm;
    }
    return out;
}

}  // namespace

SimMatrix cosine_matrix(const Matrix& rows) {
    const Matrix unit = unit_rows(rows);
    const Index n = unit.rows();
    SimMatrix sim{Matrix(n, n)};
    for (Index i = 0; i < n; ++i) {
        sim.values(i, i) = 1.0;
        for (Index j = i + 1; j < n; ++j) {
            const double s = unit.row(i).dot(unit.row(j));
            sim.values(i, j) = s;
            sim.values(j, i) = s;
        }
    }
    return sim;
}

SimMatrix cosine_matrix(const PatchSet& ps) { return cosine_matrix(ps.data); }

std::vector<Index> neighbor_degrees(const SimMatrix& sim, double theta) {
    if (!(theta >= -1.0 && theta <= 1.0)) {
        throw ParameterError("theta must lie in [-1, 1], got " + std::to_string(theta));
    }
    const Index n = sim.size();
    std::vector<Index> degrees(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i) {
        Index count = 0;
        for (Index j = 0; j < n; ++j) {
            if (sim(i, j) > theta) ++count;
        }
        degrees[static_cast<std::size_t>(i)] = count;
    }
    return degrees;
}

double mean_pairwise_similarity(const Matrix& rows) {
    const Index m = rows.rows();
    if (m < 2) {
        throw ParameterError("mean pairwise similarity needs at least two rows, got " + std::to_string(m));
    }
    // sum_{i<j} <u_i, u_j> = (|sum_i u_i|^2 - sum_i |u_i|^2) / 2
    const Matrix unit = unit_rows(rows);
    const Vector total = unit.colwise().sum().transpose();
    const double self = unit.rowwise().squaredNorm().sum();
    const double pair_sum = 0.5 * (total.squaredNorm() - self);
    return pair_sum / (0.5 * static_cast<double>(m) * static_cast<double>(m - 1));
}

std::vector<LayerSimilarity> layerwise_similarity_profile(const LayerwiseEmbeddings& le) {
    return layerwise_similarity_profile(std::span(&le, 1));
}

std::vector<LayerSimilarity> layerwise_similarity_profile(std::span<const LayerwiseEmbeddings> corpus) {
    if (corpus.empty()) {
        throw ParameterError("similarity profile needs at least one image");
    }
    for (const auto& le : corpus) {
        le.validate();
        if (le.n_layers() != corpus.front().n_layers()) {
            throw ParameterError("images disagree on layer count (" + le.id + ")");
        }
    }
    const Index n_layers = corpus.front().n_layers();
    const double n_images = static_cast<double>(corpus.size());
    std::vector<LayerSimilarity> profile;
    profile.reserve(static_cast<std::size_t>(n_layers));
    for (Index l = 0; l < n_layers; ++l) {
        std::vector<double> means;
        means.reserve(corpus.size());
        for (const auto& le : corpus) {
            means.push_back(mean_pairwise_similarity(le.layers[static_cast<std::size_t>(l)].data));
        }
        double sum = 0.0;
        for (double v : means) sum += v;
        const double mean = sum / n_images;
        double var = 0.0;
        for (double v : means) var += (v - mean) * (v - mean);
        profile.push_back({static_cast<int>(l), mean, std::sqrt(var / n_images)});
    }
    return profile;
}

}  // namespace divt
