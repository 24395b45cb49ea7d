// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "divt/clustering.hpp"
#include "divt/token_former.hpp"

namespace divt {

/// Decoder shape needed for KV-cache arithmetic.
struct ModelProfile {
    std::uint64_t n_layers = 0;
    std::uint64_t hidden_dim = 0;
    std::uint64_t bytes_per_scalar = 0;
    std::uint64_t kv_streams = 2;  // keys and values

    void validate() const;

    /// 32 layers, 4096 hidden, fp16, keys + values.
    static ModelProfile llama_7b() { return {32, 4096, 2, 2}; }
};

/// n_tokens * n_layers * kv_streams * hidden_dim * bytes_per_scalar.
std::uint64_t kv_cache_bytes(std::uint64_t n_tokens, const ModelProfile& profile);

/// kv_cache_bytes in MiB (2^20 bytes).
double kv_cache_megabytes(std::uint64_t n_tokens, const ModelProfile& profile);

struct TokenCountStats {
    double theta = 0.0;
    double mean = 0.0;
    double stddev = 0.0;  // population
    Index min = 0;
    Index max = 0;
    std::vector<Index> counts;  // K per image, corpus order
};

TokenCountStats token_count_stats(std::span<const PatchSet> corpus, double theta,
                                  DegreePolicy policy = DegreePolicy::kStatic);

struct SweepReport {
    std::vector<TokenCountStats> rows;  // ascending theta
};

/// One token_count_stats row per distinct theta, ascending.
SweepReport theta_sweep(std::span<const PatchSet> corpus, std::vector<double> thetas,
                        DegreePolicy policy = DegreePolicy::kStatic);

/// Mean pairwise cosine of the token rows; nullopt when fewer than two tokens.
std::optional<double> token_similarity_report(const TokenSequence& tokens);

/// Chance-corrected agreement between two labelings of the same items.
double adjusted_rand_index(std::span<const Index> a, std::span<const Index> b);

/// Reference values quoted for context; not reproduced by this library.
namespace reference {
inline constexpr double kLanguageTokenSimilarity = 0.0378;
inline constexpr double kLanguageTokenSimilarityStd = 0.0002;
inline constexpr double kMlpProjectorTokenSimilarity = 0.3823;
inline constexpr double kMlpProjectorTokenSimilarityStd = 0.0018;
inline constexpr double kAvgTokensTheta065 = 74.1;
inline constexpr double kAvgTokensTheta075 = 136.5;
inline constexpr double kMlpProjectorKvCacheMb = 288.0;
}  // namespace reference

}  // namespace divt
