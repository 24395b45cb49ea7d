// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#include "divt/clustering.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "divt/errors.hpp"

namespace divt {

namespace {

// Candidate order: degree descending, lowest patch index first on ties.
void sort_by_degree(std::vector<Index>& candidates, const std::vector<Index>& degree) {
    std::stable_sort(candidates.begin(), candidates.end(), [&](Index a, Index b) {
        return degree[static_cast<std::size_t>(a)] > degree[static_cast<std::size_t>(b)];
    });
}

std::vector<Index> select_static(const SimMatrix& sim, double theta) {
    const auto degree = neighbor_degrees(sim, theta);
    std::vector<Index> candidates(degree.size());
    std::iota(candidates.begin(), candidates.end(), Index{0});
    sort_by_degree(candidates, degree);

    std::vector<Index> centroids;
    while (!candidates.empty()) {
        const Index c = candidates.front();
        centroids.push_back(c);
        std::erase_if(candidates, [&](Index j) { return sim(c, j) > theta; });
    }
    return centroids;
}

std::vector<Index> select_recompute(const SimMatrix& sim, double theta) {
    const Index n = sim.size();
    std::vector<Index> candidates(static_cast<std::size_t>(n));
    std::iota(candidates.begin(), candidates.end(), Index{0});
    std::vector<Index> degree(static_cast<std::size_t>(n), 0);

    std::vector<Index> centroids;
    while (!candidates.empty()) {
        for (Index i : candidates) {
            Index count = 0;
            for (Index j : candidates) {
                if (sim(i, j) > theta) ++count;
            }
            degree[static_cast<std::size_t>(i)] = count;
        }
        // candidates stay in ascending index order, so the first maximum is the lowest index
        Index best = candidates.front();
        for (Index i : candidates) {
            if (degree[static_cast<std::size_t>(i)] > degree[static_cast<std::size_t>(best)]) best = i;
        }
        centroids.push_back(best);
        std::erase_if(candidates, [&](Index j) { return sim(best, j) > theta; });
    }
    return centroids;
}

void check_centroids(std::span<const Index> centroids, Index n) {
    if (centroids.empty()) {
        throw ParameterError("centroid list is empty");
    }
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (Index c : centroids) {
        if (c < 0 || c >= n) {
            throw ParameterError("centroid index " + std::to_string(c) + " out of range for " + std::to_string(n) +
                                 " patches");
        }
        if (seen[static_cast<std::size_t>(c)]) {
            throw ParameterError("duplicate centroid " + std::to_string(c));
        }
        seen[static_cast<std::size_t>(c)] = true;
    }
}

}  // namespace

void GranularityConfig::validate() const {
    if (!(theta > -1.0 && theta < 1.0)) {
        throw ParameterError("theta must lie in (-1, 1), got " + std::to_string(theta));
    }
}

std::vector<Index> Clustering::members(Index k) const {
    std::vector<Index> out;
    for (Index i = 0; i < n_patches(); ++i) {
        if (assignment[static_cast<std::size_t>(i)] == k) out.push_back(i);
    }
    return out;
}

void Clustering::validate(Index n) const {
    if (n_patches() != n) {
        throw ParameterError("clustering covers " + std::to_string(n_patches()) + " patches, expected " +
                             std::to_string(n));
    }
    check_centroids(centroids, n);
    for (Index a : assignment) {
        if (a < 0 || a >= k()) {
            throw ParameterError("assignment label " + std::to_string(a) + " outside [0, " + std::to_string(k()) + ")");
        }
    }
    // A centroid inside its own cluster also makes every cluster nonempty.
    for (Index c = 0; c < k(); ++c) {
        if (assignment[static_cast<std::size_t>(centroids[static_cast<std::size_t>(c)])] != c) {
            throw ParameterError("centroid of cluster " + std::to_string(c) + " is assigned elsewhere");
        }
    }
}

std::vector<Index> select_centroids(const SimMatrix& sim, const GranularityConfig& cfg) {
    cfg.validate();
    if (sim.size() == 0) return {};
    return cfg.degree_policy == DegreePolicy::kStatic ? select_static(sim, cfg.theta)
                                                      : select_recompute(sim, cfg.theta);
}

Clustering refine_assignments(const SimMatrix& sim, std::span<const Index> centroids) {
    const Index n = sim.size();
    check_centroids(centroids, n);
    Clustering out;
    out.centroids.assign(centroids.begin(), centroids.end());
    out.assignment.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        Index best = 0;
        double best_sim = sim(i, centroids[0]);
        for (std::size_t k = 1; k < centroids.size(); ++k) {
            const double s = sim(i, centroids[k]);
            if (s > best_sim) {
                best_sim = s;
                best = static_cast<Index>(k);
            }
        }
        out.assignment[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

Clustering refine_assignments(const PatchSet& ps, std::span<const Index> centroids) {
    return refine_assignments(cosine_matrix(ps), centroids);
}

std::vector<Index> order_centroids_spatial(std::span<const Index> centroids, int grid_h, int grid_w) {
    const Index n = static_cast<Index>(grid_h) * grid_w;
    for (Index c : centroids) {
        if (c < 0 || c >= n) {
            throw ParameterError("centroid " + std::to_string(c) + " outside a " + std::to_string(grid_h) + "x" +
                                 std::to_string(grid_w) + " grid");
        }
    }
    // Row-major grid position is the patch index itself.
    std::vector<Index> out(centroids.begin(), centroids.end());
    std::sort(out.begin(), out.end());
    return out;
}

Clustering cluster(const SimMatrix& sim, int grid_h, int grid_w, const GranularityConfig& cfg) {
    const auto selected = select_centroids(sim, cfg);
    const Clustering refined = refine_assignments(sim, selected);
    const auto spatial = order_centroids_spatial(selected, grid_h, grid_w);

    // selection position -> spatial position
    std::vector<Index> remap(selected.size());
    for (std::size_t s = 0; s < selected.size(); ++s) {
        const auto it = std::lower_bound(spatial.begin(), spatial.end(), selected[s]);
        remap[s] = static_cast<Index>(it - spatial.begin());
    }

    Clustering out;
    out.centroids = spatial;
    out.assignment.reserve(refined.assignment.size());
    for (Index a : refined.assignment) out.assignment.push_back(remap[static_cast<std::size_t>(a)]);

    // Every centroid wins its own argmax strictly while theta < 1, so no cluster is empty.
    for (Index k = 0; k < out.k(); ++k) {
        if (out.assignment[static_cast<std::size_t>(out.centroids[static_cast<std::size_t>(k)])] != k) {
            throw std::logic_error("centroid " + std::to_string(out.centroids[static_cast<std::size_t>(k)]) +
                                   " left its own cluster");
        }
    }
    return out;
}

Clustering cluster(const PatchSet& ps, const GranularityConfig& cfg) {
    ps.validate();
    return cluster(cosine_matrix(ps), ps.grid_h, ps.grid_w, cfg);
}

}  // namespace divt
