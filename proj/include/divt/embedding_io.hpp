// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "divt/types.hpp"

namespace divt {

/// Scalar width of a file payload. Values are always held as double in memory.
enum class Dtype : std::uint32_t { kF32 = 0, kF64 = 1 };

/// One image's patch embeddings laid out on a grid_h x grid_w patch grid.
struct PatchSet {
    std::string id;
    int grid_h = 0;
    int grid_w = 0;
    Dtype dtype = Dtype::kF32;  // payload width used by save_patch_set
    Matrix data;                // n_patches x dim, row i = patch i in row-major grid order

    Index n_patches() const { return data.rows(); }
    Index dim() const { return data.cols(); }

    /// Throws ParameterError on empty dims or grid/row mismatch, ValidationError on NaN/Inf.
    void validate() const;
};

/// Patch embeddings of one image captured at several encoder layers.
struct LayerwiseEmbeddings {
    std::string id;
    std::vector<PatchSet> layers;

    Index n_layers() const { return static_cast<Index>(layers.size()); }
    void validate() const;
};

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kPatchSetHeaderBytes = 28;
inline constexpr std::size_t kLayerwiseHeaderBytes = 32;

std::vector<std::byte> encode_patch_set(const PatchSet& ps);
PatchSet decode_patch_set(std::span<const std::byte> bytes, std::string id = {});

/// Reads a "DIVT" file. The id is the file stem.
PatchSet load_patch_set(const std::filesystem::path& path);
void save_patch_set(const PatchSet& ps, const std::filesystem::path& path);

std::vector<std::byte> encode_layerwise(const LayerwiseEmbeddings& le);
LayerwiseEmbeddings decode_layerwise(std::span<const std::byte> bytes, std::string id = {});

/// Reads a "DIVL" file holding L contiguous layer blocks.
LayerwiseEmbeddings load_layerwise(const std::filesystem::path& path);
void save_layerwise(const LayerwiseEmbeddings& le, const std::filesystem::path& path);

/// Most square grid_h x grid_w factorisation of n with grid_h <= grid_w.
std::pair<int, int> square_grid(Index n);

struct SynthSpec {
    int n_true_clusters = 1;
    int n_patches = 1;
    int dim = 1;
    double within_cluster_noise = 0.0;
    std::uint64_t seed = 0;
    // Anchors are redrawn until every pair has cosine <= this bound (1 disables).
    double anchor_max_similarity = 1.0;
    Dtype dtype = Dtype::kF64;
    // 0 picks square_grid(n_patches).
    int grid_h = 0;
    int grid_w = 0;

    void validate() const;
};

struct SynthResult {
    PatchSet patches;
    std::vector<Index> labels;  // ground-truth anchor index per patch
    Matrix anchors;
};

/// Unit anchor directions, patches assigned round-robin (patch i -> anchor i mod C),
/// Gaussian noise added per coordinate, rows renormalised to unit length.
SynthResult synth_clustered(const SynthSpec& spec);

/// A corpus of synthetic images with per-image cluster counts and noise levels.
struct SynthCorpusSpec {
    int count = 1;
    int n_patches = 36;
    int dim = 16;
    int min_clusters = 1;
    int max_clusters = 1;
    double min_noise = 0.0;
    double max_noise = 0.0;
    // Rows are multiplied by this after normalisation; cosine structure is unchanged.
    double row_scale = 1.0;
    double anchor_max_similarity = 1.0;
    Dtype dtype = Dtype::kF64;
    std::uint64_t seed = 0;
};

/// Image i is named "img-NNN" and drawn from its own seed, so the corpus is
/// identical however it is later split or processed.
std::vector<SynthResult> synth_corpus(const SynthCorpusSpec& spec);

}  // namespace divt
