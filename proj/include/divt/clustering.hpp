// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "divt/embedding_io.hpp"
#include "divt/similarity.hpp"

namespace divt {

enum class DegreePolicy {
    kStatic,     // degrees computed once over all patches, then one sort
    kRecompute,  // degrees recomputed on the surviving candidates before each pick
};

struct GranularityConfig {
    double theta = 0.65;
    DegreePolicy degree_policy = DegreePolicy::kStatic;

    /// theta must lie in (-1, 1).
    void validate() const;
};

/// Patch -> cluster partition. Cluster k is anchored at patch centroids[k];
/// centroids are stored in row-major grid order.
struct Clustering {
    std::vector<Index> centroids;
    std::vector<Index> assignment;  // assignment[i] = cluster index in [0, k)

    Index k() const { return static_cast<Index>(centroids.size()); }
    Index n_patches() const { return static_cast<Index>(assignment.size()); }

    /// Indices of the patches in cluster k, ascending.
    std::vector<Index> members(Index k) const;

    /// Throws ParameterError unless the assignment is a total map onto
    /// nonempty clusters and every centroid belongs to its own cluster.
    void validate(Index n_patches) const;
};

/// Greedy degree-ordered centroid selection. Returns centroids in selection order.
std::vector<Index> select_centroids(const SimMatrix& sim, const GranularityConfig& cfg);

/// Assigns every patch to its most similar centroid; ties go to the earlier
/// centroid in the list. Cluster k corresponds to centroids[k].
Clustering refine_assignments(const SimMatrix& sim, std::span<const Index> centroids);
Clustering refine_assignments(const PatchSet& ps, std::span<const Index> centroids);

/// Sorts centroids by row-major grid position.
std::vector<Index> order_centroids_spatial(std::span<const Index> centroids, int grid_h, int grid_w);

/// cosine_matrix -> select_centroids -> refine_assignments -> spatial ordering.
Clustering cluster(const PatchSet& ps, const GranularityConfig& cfg);
Clustering cluster(const SimMatrix& sim, int grid_h, int grid_w, const GranularityConfig& cfg);

}  // namespace divt
