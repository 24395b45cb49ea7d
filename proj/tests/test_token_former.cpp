// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "divt/errors.hpp"
#include "divt/gradcheck.hpp"
#include "divt/oracle.hpp"
#include "divt/token_former.hpp"
#include "test_support.hpp"

using namespace divt;
using testing::make_patch_set;

namespace {

TokenFormerParams small_params(Index d, Index n_max, std::uint64_t seed, ScalePolicy policy = ScalePolicy::kScaled) {
    auto p = init_params({d, 4, 5, 3, n_max}, seed, 0.5, policy);
    Rng rng(seed + 1);
    for (Index i = 0; i < p.b1.size(); ++i) p.b1(i) = rng.normal(0, 0.3);
    for (Index i = 0; i < p.b2.size(); ++i) p.b2(i) = rng.normal(0, 0.3);
    return p;
}

Vector mlp(const TokenFormerParams& p, const Vector& pooled) {
    Vector h = p.w1 * pooled + p.b1;
    for (Index i = 0; i < h.size(); ++i) h(i) = gelu(h(i));
    return p.w2 * h + p.b2;
}

double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("init is deterministic per seed with the declared moments") {
    const TokenFormerDims dims{6, 8, 5, 3, 16};
    const auto a = init_params(dims, 1);
    const auto b = init_params(dims, 1);
    const auto c = init_params(dims, 2);
    CHECK(a.flatten() == b.flatten());
    CHECK(a.flatten() != c.flatten());
    CHECK(a.b1.isZero(0.0));
    CHECK(a.b2.isZero(0.0));

    // 10^6 positional entries plus the weights
    const auto big = init_params({1000, 8, 8, 8, 1000}, 3);
    const auto flat = big.pos_table;
    const double n = static_cast<double>(flat.size());
    const double mean = flat.sum() / n;
    const double std = std::sqrt((flat.array() - mean).square().sum() / n);
    CHECK(std::abs(mean) < 0.01 * 0.02);
    CHECK(std::abs(std - 0.02) < 0.01 * 0.02);

    CHECK_THROWS_AS(init_params({0, 8, 5, 3, 16}, 1), ParameterError);
}

TEST_CASE("singleton cluster pools exactly its own value") {
    const auto ps = make_patch_set({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    const Clustering cl{{0, 1, 2}, {0, 1, 2}};
    const auto p = small_params(3, 3, 9);
    const auto tokens = form_tokens(ps, cl, p);
    for (Index k = 0; k < 3; ++k) {
        const Vector pooled = p.w_v * (ps.data.row(k) + p.pos_table.row(k)).transpose();
        CHECK(max_abs_diff(tokens.tokens.row(k), mlp(p, pooled).transpose()) == 0.0);
    }
    CHECK(attention_weights(ps, cl, p) == Matrix::Identity(3, 3));
}

TEST_CASE("identical patches with identical positions split attention evenly") {
    const auto ps = make_patch_set({{0.3, -0.2}, {0.3, -0.2}});
    const Clustering cl{{0}, {0, 0}};
    auto p = small_params(2, 2, 4);
    p.pos_table.row(1) = p.pos_table.row(0);
    const auto w = attention_weights(ps, cl, p);
    CHECK(w(0, 0) == 0.5);
    CHECK(w(0, 1) == 0.5);
}

TEST_CASE("three-patch cluster with hand-set 2x2 weights matches the triple loop") {
    const auto ps = make_patch_set({{1, 0.5}, {0.2, -1}, {-0.4, 0.3}});
    const Clustering cl{{1}, {0, 0, 0}};
    TokenFormerParams p;
    p.w_q.resize(2, 2);
    p.w_q << 0.9, -0.3, 0.4, 1.1;
    p.w_k.resize(2, 2);
    p.w_k << -0.7, 0.2, 0.5, 0.8;
    p.w_v.resize(2, 2);
    p.w_v << 1.0, 0.25, -0.5, 0.75;
    p.pos_table.resize(3, 2);
    p.pos_table << 0.1, 0.0, 0.0, -0.1, 0.05, 0.05;
    p.w1.resize(2, 2);
    p.w1 << 0.6, -0.4, 0.3, 0.9;
    p.b1 = Vector::Constant(2, 0.1);
    p.w2.resize(2, 2);
    p.w2 << 1.2, 0.0, -0.3, 0.7;
    p.b2 = Vector::Constant(2, -0.05);
    for (auto policy : {ScalePolicy::kScaled, ScalePolicy::kUnscaled}) {
        p.scale_policy = policy;
        const auto fast = form_tokens(ps, cl, p);
        const auto slow = oracle::naive_attention(ps, cl, p);
        CHECK(max_abs_diff(fast.tokens, slow.tokens) < 1e-12);
    }
}

TEST_CASE("form_tokens matches naive attention on random instances") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const auto ps = testing::random_instance(rng, 20, 8);
        const auto cl = cluster(ps, {0.3 + 0.5 * rng.uniform()});
        const auto policy = trial % 2 ? ScalePolicy::kScaled : ScalePolicy::kUnscaled;
        const auto p = small_params(ps.dim(), ps.n_patches() + 3, rng.next_u64(), policy);
        const auto fast = form_tokens(ps, cl, p);
        CHECK(fast.centroids == cl.centroids);
        CHECK(max_abs_diff(fast.tokens, oracle::naive_attention(ps, cl, p).tokens) < 1e-12);

        const auto w = attention_weights(ps, cl, p);
        const auto slow_w = oracle::naive_attention_weights(ps, cl, p);
        for (Index k = 0; k < cl.k(); ++k) {
            CHECK(std::abs(w.row(k).sum() - 1.0) < 1e-12);
            for (Index i = 0; i < ps.n_patches(); ++i) CHECK(std::abs(w(k, i) - slow_w[k][i]) < 1e-12);
        }
    }
}

TEST_CASE("scaled and unscaled logits agree only when d_att is 1") {
    Rng rng(3);
    const auto ps = testing::random_instance(rng, 12, 6, 12);
    const Clustering cl{{0}, std::vector<Index>(static_cast<std::size_t>(ps.n_patches()), 0)};
    for (Index d_att : {1, 4}) {
        auto p = init_params({ps.dim(), d_att, 3, 3, ps.n_patches()}, 5, 0.8);
        const auto scaled = oracle::naive_attention(ps, cl, p).tokens;
        p.scale_policy = ScalePolicy::kUnscaled;
        const auto unscaled = oracle::naive_attention(ps, cl, p).tokens;
        if (d_att == 1) {
            CHECK(max_abs_diff(scaled, unscaled) == 0.0);
        } else {
            CHECK(max_abs_diff(scaled, unscaled) > 1e-9);
        }
    }
}

TEST_CASE("attention is supported on exactly one token per patch") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const auto ps = testing::random_instance(rng, 30, 8);
        const auto cl = cluster(ps, {0.5});
        const auto w = attention_weights(ps, cl, small_params(ps.dim(), ps.n_patches(), trial));
        const auto mask = AttentionMask::from_clustering(cl);
        for (Index i = 0; i < ps.n_patches(); ++i) {
            int nonzero = 0;
            for (Index k = 0; k < cl.k(); ++k) {
                CHECK(mask.mask(k, i) == (cl.assignment[i] == k));
                if (w(k, i) != 0.0) {
                    ++nonzero;
                    CHECK(k == cl.assignment[i]);
                    CHECK(w(k, i) > 0.0);
                }
            }
            CHECK(nonzero == 1);
        }
    }
}

TEST_CASE("perturbing patches outside a cluster leaves its token bit-identical") {
    Rng rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        const auto ps = testing::random_instance(rng, 32, 8, 4);
        const auto cl = cluster(ps, {0.6});
        const auto p = small_params(ps.dim(), ps.n_patches(), trial);
        const auto base = form_tokens(ps, cl, p);
        const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(ps.n_patches())));
        auto moved = ps;
        for (Index t = 0; t < ps.dim(); ++t) moved.data(j, t) += rng.normal();
        const auto after = form_tokens(moved, cl, p);
        for (Index k = 0; k < cl.k(); ++k) {
            if (cl.assignment[j] == k) continue;
            CHECK(after.tokens.row(k) == base.tokens.row(k));
        }
    }
}

TEST_CASE("permuting patches permutes tokens") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const auto ps = testing::random_instance(rng, 24, 6, 2);
        const auto cl = cluster(ps, {0.5});
        const auto p = small_params(ps.dim(), ps.n_patches(), trial);
        const Index n = ps.n_patches();

        std::vector<Index> perm(static_cast<std::size_t>(n));  // new position -> old patch
        std::iota(perm.begin(), perm.end(), Index{0});
        for (Index i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i + 1))]);
        std::vector<Index> inv(perm.size());
        for (Index i = 0; i < n; ++i) inv[perm[i]] = i;

        auto ps2 = ps;
        auto p2 = p;
        for (Index i = 0; i < n; ++i) {
            ps2.data.row(i) = ps.data.row(perm[i]);
            p2.pos_table.row(i) = p.pos_table.row(perm[i]);
        }
        // same clusters under the new labels, centroids sorted by their new position
        std::vector<std::pair<Index, Index>> moved;  // (new centroid index, old cluster)
        for (Index k = 0; k < cl.k(); ++k) moved.push_back({inv[cl.centroids[k]], k});
        std::sort(moved.begin(), moved.end());
        std::vector<Index> old_to_new(static_cast<std::size_t>(cl.k()));
        Clustering cl2;
        for (std::size_t k = 0; k < moved.size(); ++k) {
            cl2.centroids.push_back(moved[k].first);
            old_to_new[moved[k].second] = static_cast<Index>(k);
        }
        for (Index i = 0; i < n; ++i) cl2.assignment.push_back(old_to_new[cl.assignment[perm[i]]]);

        const auto a = form_tokens(ps, cl, p);
        const auto b = form_tokens(ps2, cl2, p2);
        for (Index k = 0; k < cl.k(); ++k) {
            CHECK((a.tokens.row(k) - b.tokens.row(old_to_new[k])).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("zero upstream gives zero gradients") {
    Rng rng(2);
    const auto ps = testing::random_instance(rng, 16, 6, 8);
    const auto cl = cluster(ps, {0.5});
    const auto p = small_params(ps.dim(), ps.n_patches(), 1);
    const auto g = backward(ps, cl, p, Matrix::Zero(cl.k(), 3));
    for (double v : g.params.flatten()) CHECK(v == 0.0);
    CHECK(g.inputs.isZero(0.0));
    CHECK_THROWS_AS(backward(ps, cl, p, Matrix::Zero(cl.k() + 1, 3)), ParameterError);
}

TEST_CASE("analytic gradients match central differences") {
    const auto inst = random_gradcheck_instance(12, 6, 0.6, 2718);
    CHECK(inst.clustering.k() < 12);
    const auto report = gradcheck(inst.patches, inst.clustering, inst.params, inst.probe);
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-4);
    CHECK(report.coordinates == inst.params.num_scalars() + 12 * 6);
}

TEST_CASE("positional rows past the image size receive no gradient") {
    Rng rng(6);
    const auto ps = testing::random_instance(rng, 10, 5, 10);
    const auto cl = cluster(ps, {0.5});
    const auto p = small_params(ps.dim(), 40, 2);
    Matrix upstream(cl.k(), 3);
    for (Index i = 0; i < upstream.size(); ++i) upstream.data()[i] = rng.normal();
    const auto g = backward(ps, cl, p, upstream);
    CHECK(g.params.pos_table.bottomRows(40 - ps.n_patches()).isZero(0.0));
    CHECK_FALSE(g.params.pos_table.topRows(ps.n_patches()).isZero(0.0));
}

TEST_CASE("inconsistent inputs are rejected") {
    const auto ps = make_patch_set({{1, 0}, {0, 1}, {1, 1}});
    const Clustering cl{{0, 1}, {0, 1, 0}};
    CHECK_THROWS_AS(form_tokens(ps, cl, small_params(3, 3, 1)), ParameterError);   // width
    CHECK_THROWS_AS(form_tokens(ps, cl, small_params(2, 2, 1)), ParameterError);   // capacity
    CHECK_THROWS_AS(form_tokens(ps, Clustering{{0}, {0, 0}}, small_params(2, 3, 1)), ParameterError);
    auto bad = small_params(2, 3, 1);
    bad.w_k.resize(3, 2);
    CHECK_THROWS_AS(form_tokens(ps, cl, bad), ParameterError);
}

TEST_CASE("checkpoint round trip") {
    const auto p = small_params(5, 9, 77, ScalePolicy::kUnscaled);
    const auto bytes = encode_params(p);
    CHECK(bytes.size() == 32 + 8 * static_cast<std::size_t>(p.num_scalars()));
    const auto back = decode_params(bytes);
    CHECK(back.flatten() == p.flatten());
    CHECK(back.scale_policy == ScalePolicy::kUnscaled);
    CHECK(encode_params(back) == bytes);

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_params(truncated), FormatError);
    auto magic = bytes;
    magic[0] = std::byte{'X'};
    CHECK_THROWS_AS(decode_params(magic), FormatError);
}

TEST_CASE("gelu derivative matches central differences") {
    for (double x = -4; x <= 4; x += 0.37) {
        const double numeric = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
        CHECK(std::abs(gelu_grad(x) - numeric) < 1e-8);
    }
}
