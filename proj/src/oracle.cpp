// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#include "divt/oracle.hpp"

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "divt/errors.hpp"

namespace divt::oracle {

namespace {

double erf_gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

std::size_t at(Index i) { return static_cast<std::size_t>(i); }

}  // namespace

std::vector<Index> brute_force_centroids(const SimMatrix& sim, double theta) {
    if (!(theta > -1.0 && theta < 1.0)) {
        throw ParameterError("theta must lie in (-1, 1)");
    }
    const Index n = sim.size();

    std::vector<Index> degree(at(n), 0);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (sim.values(i, j) > theta) degree[at(i)] += 1;
        }
    }

    // argsort descending, ties by index: repeated selection of the max with lowest index.
    std::vector<Index> order;
    std::set<Index> unsorted;
    for (Index i = 0; i < n; ++i) unsorted.insert(i);
    while (!unsorted.empty()) {
        Index best = -1;
        for (Index i : unsorted) {
            if (best < 0 || degree[at(i)] > degree[at(best)]) best = i;
        }
        order.push_back(best);
        unsorted.erase(best);
    }

    std::vector<Index> centroids;
    std::vector<Index> candidates = order;
    while (!candidates.empty()) {
        const Index c = candidates[0];
        centroids.push_back(c);
        std::set<Index> drop;
        for (Index j = 0; j < n; ++j) {
            if (sim.values(c, j) > theta) drop.insert(j);
        }
        std::vector<Index> kept;
        for (Index j : candidates) {
            if (drop.count(j) == 0) kept.push_back(j);
        }
        candidates = kept;
    }
    return centroids;
}

std::vector<std::vector<double>> naive_attention_weights(const PatchSet& ps, const Clustering& cl,
                                                         const TokenFormerParams& params) {
    const Index n = ps.n_patches();
    const Index d = ps.dim();
    const Index d_att = params.w_q.rows();
    const double scale = params.scale_policy == ScalePolicy::kScaled ? 1.0 / std::sqrt(double(d_att)) : 1.0;

    std::vector<std::vector<double>> weights(at(cl.k()), std::vector<double>(at(n), 0.0));
    for (Index k = 0; k < cl.k(); ++k) {
        const Index c = cl.centroids[at(k)];
        std::vector<double> q(at(d_att), 0.0);
        for (Index a = 0; a < d_att; ++a) {
            for (Index t = 0; t < d; ++t) q[at(a)] += params.w_q(a, t) * ps.data(c, t);
        }
        std::vector<double> logit(at(n), 0.0);
        double peak = -INFINITY;
        for (Index i = 0; i < n; ++i) {
            if (cl.assignment[at(i)] != k) continue;
            double dot = 0.0;
            for (Index a = 0; a < d_att; ++a) {
                double key = 0.0;
                for (Index t = 0; t < d; ++t) key += params.w_k(a, t) * ps.data(i, t);
                dot += q[at(a)] * key;
            }
            logit[at(i)] = scale * dot;
            if (logit[at(i)] > peak) peak = logit[at(i)];
        }
        double total = 0.0;
        for (Index i = 0; i < n; ++i) {
            if (cl.assignment[at(i)] != k) continue;
            weights[at(k)][at(i)] = std::exp(logit[at(i)] - peak);
            total += weights[at(k)][at(i)];
        }
        for (Index i = 0; i < n; ++i) weights[at(k)][at(i)] /= total;
    }
    return weights;
}

TokenSequence naive_attention(const PatchSet& ps, const Clustering& cl, const TokenFormerParams& params) {
    const Index n = ps.n_patches();
    const Index d = ps.dim();
    const Index d_att = params.w_v.rows();
    const Index d_hidden = params.w1.rows();
    const Index d_out = params.w2.rows();
    const auto weights = naive_attention_weights(ps, cl, params);

    TokenSequence out;
    out.centroids = cl.centroids;
    out.tokens.resize(cl.k(), d_out);
    for (Index k = 0; k < cl.k(); ++k) {
        std::vector<double> pooled(at(d_att), 0.0);
        for (Index i = 0; i < n; ++i) {
            if (cl.assignment[at(i)] != k) continue;
            for (Index a = 0; a < d_att; ++a) {
                double v = 0.0;
                for (Index t = 0; t < d; ++t) v += params.w_v(a, t) * (ps.data(i, t) + params.pos_table(i, t));
                pooled[at(a)] += weights[at(k)][at(i)] * v;
            }
        }
        std::vector<double> hidden(at(d_hidden), 0.0);
        for (Index h = 0; h < d_hidden; ++h) {
            double z = params.b1(h);
            for (Index a = 0; a < d_att; ++a) z += params.w1(h, a) * pooled[at(a)];
            hidden[at(h)] = erf_gelu(z);
        }
        for (Index o = 0; o < d_out; ++o) {
            double z = params.b2(o);
            for (Index h = 0; h < d_hidden; ++h) z += params.w2(o, h) * hidden[at(h)];
            out.tokens(k, o) = z;
        }
    }
    return out;
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss,
                                     std::vector<double> params, double eps) {
    if (!(eps > 0.0)) {
        throw std::invalid_argument("finite-difference step must be positive");
    }
    std::vector<double> grad(params.size(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + eps;
        const double up = loss(params);
        params[i] = saved - eps;
        const double down = loss(params);
        params[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw std::domain_error("loss is non-finite at coordinate " + std::to_string(i));
        }
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

double pair_counting_ari(std::span<const Index> a, std::span<const Index> b) {
    if (a.size() != b.size()) {
        throw ParameterError("labelings differ in length");
    }
    // same/same, same/diff, diff/same, diff/diff
    double ss = 0, sd = 0, ds = 0, dd = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const bool same_a = a[i] == a[j];
            const bool same_b = b[i] == b[j];
            if (same_a && same_b) ss += 1;
            else if (same_a) sd += 1;
            else if (same_b) ds += 1;
            else dd += 1;
        }
    }
    const double denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    if (denom == 0.0) return 1.0;  // both labelings trivial and identical in structure
    return 2.0 * (ss * dd - sd * ds) / denom;
}

}  // namespace divt::oracle
