// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "divt/metrics.hpp"
#include "divt/oracle.hpp"
#include "test_support.hpp"

using namespace divt;

TEST_CASE("finite differences of a quadratic") {
    const std::vector<double> p{0.5, -1.25, 3.0, 0.0};
    const auto g = oracle::finite_diff_grad(
        [](std::span<const double> x) {
            double s = 0;
            for (double v : x) s += v * v;
            return s;
        },
        p, 1e-5);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(g[i] - 2 * p[i]) < 1e-8);
}

TEST_CASE("finite differences of a constant are zero") {
    const auto g = oracle::finite_diff_grad([](std::span<const double>) { return 4.2; }, {1, 2, 3}, 1e-3);
    for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("finite differences reject bad inputs") {
    CHECK_THROWS_AS(oracle::finite_diff_grad([](std::span<const double>) { return 1.0; }, {1}, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(oracle::finite_diff_grad(
                        [](std::span<const double> x) { return x[0] > 1 ? std::numeric_limits<double>::infinity() : 0; },
                        {1}, 0.5),
                    std::domain_error);
}

TEST_CASE("brute force on orthogonal rows is index order") {
    SimMatrix s{Matrix::Identity(5, 5)};
    CHECK(oracle::brute_force_centroids(s, 0.5) == std::vector<Index>{0, 1, 2, 3, 4});
}

TEST_CASE("pair-counting ARI agrees with the contingency-table ARI") {
    CHECK(oracle::pair_counting_ari(std::vector<Index>{0, 0, 1, 1}, std::vector<Index>{5, 5, 2, 2}) == 1.0);
    CHECK(oracle::pair_counting_ari(std::vector<Index>{0, 0, 0}, std::vector<Index>{0, 1, 2}) == 0.0);
    Rng rng(10);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.below(40);
        const std::uint64_t ka = 1 + rng.below(6), kb = 1 + rng.below(6);
        std::vector<Index> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = static_cast<Index>(rng.below(ka));
            b[i] = rng.uniform() < 0.6 ? a[i] : static_cast<Index>(rng.below(kb));
        }
        CHECK(std::abs(oracle::pair_counting_ari(a, b) - adjusted_rand_index(a, b)) < 1e-12);
    }
}
