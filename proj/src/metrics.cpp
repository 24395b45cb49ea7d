// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#include "divt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "divt/errors.hpp"
#include "divt/parallel.hpp"
#include "divt/similarity.hpp"

namespace divt {

void ModelProfile::validate() const {
    if (n_layers == 0 || hidden_dim == 0 || bytes_per_scalar == 0 || kv_streams == 0) {
        throw ParameterError("model profile fields must be positive");
    }
}

std::uint64_t kv_cache_bytes(std::uint64_t n_tokens, const ModelProfile& profile) {
    profile.validate();
    return n_tokens * profile.n_layers * profile.kv_streams * profile.hidden_dim * profile.bytes_per_scalar;
}

double kv_cache_megabytes(std::uint64_t n_tokens, const ModelProfile& profile) {
    return static_cast<double>(kv_cache_bytes(n_tokens, profile)) / static_cast<double>(1u << 20);
}

TokenCountStats token_count_stats(std::span<const PatchSet> corpus, double theta, DegreePolicy policy) {
    if (corpus.empty()) throw ParameterError("token count statistics need a nonempty corpus");
    const GranularityConfig cfg{theta, policy};
    cfg.validate();

    TokenCountStats s;
    s.theta = theta;
    s.counts.assign(corpus.size(), 0);
    parallel_for(corpus.size(), [&](std::size_t i) { s.counts[i] = cluster(corpus[i], cfg).k(); });

    double sum = 0.0;
    for (Index k : s.counts) sum += static_cast<double>(k);
    s.mean = sum / static_cast<double>(corpus.size());
    double var = 0.0;
    for (Index k : s.counts) var += (static_cast<double>(k) - s.mean) * (static_cast<double>(k) - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(corpus.size()));
    const auto [lo, hi] = std::minmax_element(s.counts.begin(), s.counts.end());
    s.min = *lo;
    s.max = *hi;
    return s;
}

SweepReport theta_sweep(std::span<const PatchSet> corpus, std::vector<double> thetas, DegreePolicy policy) {
    if (thetas.empty()) throw ParameterError("theta sweep needs at least one threshold");
    std::sort(thetas.begin(), thetas.end());
    thetas.erase(std::unique(thetas.begin(), thetas.end()), thetas.end());
    SweepReport report;
    for (double t : thetas) report.rows.push_back(token_count_stats(corpus, t, policy));
    return report;
}

std::optional<double> token_similarity_report(const TokenSequence& tokens) {
    if (tokens.k() < 2) return std::nullopt;
    return mean_pairwise_similarity(tokens.tokens);
}

double adjusted_rand_index(std::span<const Index> a, std::span<const Index> b) {
    if (a.size() != b.size()) throw ParameterError("labelings differ in length");
    const double n = static_cast<double>(a.size());
    auto choose2 = [](double x) { return 0.5 * x * (x - 1.0); };

    std::map<std::pair<Index, Index>, double> joint;
    std::map<Index, double> rows;
    std::map<Index, double> cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    double index = 0.0;
    for (const auto& [_, c] : joint) index += choose2(c);
    double sum_rows = 0.0;
    for (const auto& [_, c] : rows) sum_rows += choose2(c);
    double sum_cols = 0.0;
    for (const auto& [_, c] : cols) sum_cols += choose2(c);

    const double total = choose2(n);
    if (total == 0.0) return 1.0;
    const double expected = sum_rows * sum_cols / total;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;  // both labelings all-one-cluster or all-singletons
    return (index - expected) / (max_index - expected);
}

}  // namespace divt
