// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#include "divt/embedding_io.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "bytes.hpp"
#include "divt/errors.hpp"
#include "divt/fileio.hpp"
#include "divt/random.hpp"

namespace divt {

namespace {

void check_finite(const Matrix& data, const std::string& where) {
    for (Index r = 0; r < data.rows(); ++r) {
        for (Index c = 0; c < data.cols(); ++c) {
            if (!std::isfinite(data(r, c))) {
                throw ValidationError(r, c,
                                      where + ": non-finite value at row " + std::to_string(r) + ", col " +
                                          std::to_string(c));
            }
        }
    }
}

void check_shape(Index n, Index d, int grid_h, int grid_w, const std::string& where) {
    if (n < 1 || d < 1) {
        throw ParameterError(where + ": need at least one patch and one dimension (got N=" + std::to_string(n) +
                             ", d=" + std::to_string(d) + ")");
    }
    if (grid_h < 1 || grid_w < 1 || static_cast<Index>(grid_h) * grid_w != n) {
        throw ParameterError(where + ": grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                             " does not hold " + std::to_string(n) + " patches");
    }
    constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
    if (static_cast<std::uint64_t>(n) > kMax || static_cast<std::uint64_t>(d) > kMax) {
        throw ParameterError(where + ": dimensions exceed u32 range");
    }
}

Dtype read_dtype(detail::ByteReader& in) {
    const auto raw = in.u32("dtype");
    if (raw != static_cast<std::uint32_t>(Dtype::kF32) && raw != static_cast<std::uint32_t>(Dtype::kF64)) {
        throw FormatError(FormatError::Kind::kBadDtype, "unknown dtype code " + std::to_string(raw));
    }
    return static_cast<Dtype>(raw);
}

std::size_t scalar_bytes(Dtype dtype) { return dtype == Dtype::kF32 ? 4 : 8; }

void write_block(detail::ByteWriter& out, const Matrix& data, Dtype dtype) {
    for (Index r = 0; r < data.rows(); ++r) {
        for (Index c = 0; c < data.cols(); ++c) {
            if (dtype == Dtype::kF32) {
                out.f32(static_cast<float>(data(r, c)));
            } else {
                out.f64(data(r, c));
            }
        }
    }
}

Matrix read_block(detail::ByteReader& in, Index n, Index d, Dtype dtype) {
    in.need(static_cast<std::size_t>(n) * static_cast<std::size_t>(d) * scalar_bytes(dtype), "payload");
    Matrix data(n, d);
    for (Index r = 0; r < n; ++r) {
        for (Index c = 0; c < d; ++c) {
            data(r, c) = dtype == Dtype::kF32 ? static_cast<double>(in.f32("payload")) : in.f64("payload");
        }
    }
    return data;
}

}  // namespace

void PatchSet::validate() const {
    check_shape(n_patches(), dim(), grid_h, grid_w, id.empty() ? "patch set" : id);
    check_finite(data, id.empty() ? "patch set" : id);
}

void LayerwiseEmbeddings::validate() const {
    if (layers.empty()) {
        throw ParameterError("layerwise embeddings need at least one layer");
    }
    for (const auto& layer : layers) {
        layer.validate();
        if (layer.n_patches() != layers.front().n_patches() || layer.dim() != layers.front().dim() ||
            layer.grid_h != layers.front().grid_h || layer.grid_w != layers.front().grid_w) {
            throw ParameterError("layers disagree on N, d or grid");
        }
    }
}

std::vector<std::byte> encode_patch_set(const PatchSet& ps) {
    ps.validate();
    detail::ByteWriter out;
    out.reserve(kPatchSetHeaderBytes + static_cast<std::size_t>(ps.data.size()) * scalar_bytes(ps.dtype));
    out.magic("DIVT");
    out.u32(kFormatVersion);
    out.u32(static_cast<std::uint32_t>(ps.dtype));
    out.u32(static_cast<std::uint32_t>(ps.n_patches()));
    out.u32(static_cast<std::uint32_t>(ps.dim()));
    out.u32(static_cast<std::uint32_t>(ps.grid_h));
    out.u32(static_cast<std::uint32_t>(ps.grid_w));
    write_block(out, ps.data, ps.dtype);
    return out.take();
}

PatchSet decode_patch_set(std::span<const std::byte> bytes, std::string id) {
    detail::ByteReader in(bytes);
    if (!in.magic_is("DIVT")) {
        throw FormatError(FormatError::Kind::kBadMagic, "bad magic, expected \"DIVT\"");
    }
    const auto version = in.u32("version");
    if (version != kFormatVersion) {
        throw FormatError(FormatError::Kind::kBadVersion, "unsupported version " + std::to_string(version));
    }
    PatchSet ps;
    ps.id = std::move(id);
    ps.dtype = read_dtype(in);
    const Index n = in.u32("N");
    const Index d = in.u32("d");
    ps.grid_h = static_cast<int>(in.u32("grid_h"));
    ps.grid_w = static_cast<int>(in.u32("grid_w"));
    if (n < 1 || d < 1 || static_cast<Index>(ps.grid_h) * ps.grid_w != n) {
        throw FormatError(FormatError::Kind::kBadHeader, "inconsistent header: N=" + std::to_string(n) +
                                                             " d=" + std::to_string(d) + " grid " +
                                                             std::to_string(ps.grid_h) + "x" +
                                                             std::to_string(ps.grid_w));
    }
    ps.data = read_block(in, n, d, ps.dtype);
    in.expect_end();
    check_finite(ps.data, ps.id.empty() ? "patch set" : ps.id);
    return ps;
}

PatchSet load_patch_set(const std::filesystem::path& path) {
    try {
        return decode_patch_set(read_file(path), path.stem().string());
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path.string() + ": " + e.what());
    }
}

void save_patch_set(const PatchSet& ps, const std::filesystem::path& path) {
    write_file_atomic(path, encode_patch_set(ps));
}

std::vector<std::byte> encode_layerwise(const LayerwiseEmbeddings& le) {
    le.validate();
    const auto& first = le.layers.front();
    detail::ByteWriter out;
    out.magic("DIVL");
    out.u32(kFormatVersion);
    out.u32(static_cast<std::uint32_t>(first.dtype));
    out.u32(static_cast<std::uint32_t>(le.n_layers()));
    out.u32(static_cast<std::uint32_t>(first.n_patches()));
    out.u32(static_cast<std::uint32_t>(first.dim()));
    out.u32(static_cast<std::uint32_t>(first.grid_h));
    out.u32(static_cast<std::uint32_t>(first.grid_w));
    for (const auto& layer : le.layers) {
        write_block(out, layer.data, first.dtype);
    }
    return out.take();
}

LayerwiseEmbeddings decode_layerwise(std::span<const std::byte> bytes, std::string id) {
    detail::ByteReader in(bytes);
    if (!in.magic_is("DIVL")) {
        throw FormatError(FormatError::Kind::kBadMagic, "bad magic, expected \"DIVL\"");
    }
    const auto version = in.u32("version");
    if (version != kFormatVersion) {
        throw FormatError(FormatError::Kind::kBadVersion, "unsupported version " + std::to_string(version));
    }
    const Dtype dtype = read_dtype(in);
    const Index n_layers = in.u32("L");
    const Index n = in.u32("N");
    const Index d = in.u32("d");
    const int grid_h = static_cast<int>(in.u32("grid_h"));
    const int grid_w = static_cast<int>(in.u32("grid_w"));
    if (n_layers < 1 || n < 1 || d < 1 || static_cast<Index>(grid_h) * grid_w != n) {
        throw FormatError(FormatError::Kind::kBadHeader, "inconsistent layerwise header");
    }
    in.need(static_cast<std::size_t>(n_layers) * static_cast<std::size_t>(n) * static_cast<std::size_t>(d) *
                scalar_bytes(dtype),
            "layer payload");
    LayerwiseEmbeddings le;
    le.id = std::move(id);
    for (Index l = 0; l < n_layers; ++l) {
        PatchSet ps;
        ps.id = le.id + "#" + std::to_string(l);
        ps.dtype = dtype;
        ps.grid_h = grid_h;
        ps.grid_w = grid_w;
        ps.data = read_block(in, n, d, dtype);
        check_finite(ps.data, "layer " + std::to_string(l));
        le.layers.push_back(std::move(ps));
    }
    in.expect_end();
    return le;
}

LayerwiseEmbeddings load_layerwise(const std::filesystem::path& path) {
    try {
        return decode_layerwise(read_file(path), path.stem().string());
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path.string() + ": " + e.what());
    }
}

void save_layerwise(const LayerwiseEmbeddings& le, const std::filesystem::path& path) {
    write_file_atomic(path, encode_layerwise(le));
}

std::pair<int, int> square_grid(Index n) {
    if (n < 1) {
        throw ParameterError("grid needs at least one patch");
    }
    int h = static_cast<int>(std::sqrt(static_cast<double>(n)));
    while (h > 1 && n % h != 0) --h;
    return {h, static_cast<int>(n / h)};
}

void SynthSpec::validate() const {
    if (n_patches < 1 || dim < 1) {
        throw ParameterError("synthetic set needs N >= 1 and d >= 1");
    }
    if (n_true_clusters < 1 || n_true_clusters > n_patches) {
        throw ParameterError("n_true_clusters must be in [1, N]");
    }
    if (!(within_cluster_noise >= 0.0) || !std::isfinite(within_cluster_noise)) {
        throw ParameterError("within-cluster noise must be finite and >= 0");
    }
    if ((grid_h != 0 || grid_w != 0) && static_cast<Index>(grid_h) * grid_w != n_patches) {
        throw ParameterError("explicit grid does not hold N patches");
    }
}

SynthResult synth_clustered(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const Index c = spec.n_true_clusters;
    const Index d = spec.dim;

    auto draw_unit = [&](auto row) {
        double norm = 0.0;
        do {
            for (Index j = 0; j < d; ++j) row(j) = rng.normal();
            norm = row.norm();
        } while (norm == 0.0);
        row /= norm;
    };

    Matrix anchors(c, d);
    constexpr int kMaxAttempts = 10000;
    for (Index a = 0; a < c; ++a) {
        int attempt = 0;
        for (;; ++attempt) {
            if (attempt == kMaxAttempts) {
                throw ParameterError("cannot place " + std::to_string(c) + " anchors in " + std::to_string(d) +
                                     " dims with pairwise cosine <= " +
                                     std::to_string(spec.anchor_max_similarity));
            }
            draw_unit(anchors.row(a));
            bool separated = true;
            for (Index b = 0; b < a && separated; ++b) {
                separated = anchors.row(a).dot(anchors.row(b)) <= spec.anchor_max_similarity;
            }
            if (separated) break;
        }
    }

    SynthResult out;
    out.anchors = anchors;
    out.labels.resize(static_cast<std::size_t>(spec.n_patches));
    Matrix data(spec.n_patches, d);
    for (Index i = 0; i < spec.n_patches; ++i) {
        const Index label = i % c;
        out.labels[static_cast<std::size_t>(i)] = label;
        for (Index j = 0; j < d; ++j) {
            data(i, j) = anchors(label, j) + spec.within_cluster_noise * rng.normal();
        }
        const double norm = data.row(i).norm();
        if (norm > 0.0) data.row(i) /= norm;
        if (spec.dtype == Dtype::kF32) {
            for (Index j = 0; j < d; ++j) data(i, j) = static_cast<float>(data(i, j));
        }
    }

    auto& ps = out.patches;
    ps.id = "synth-" + std::to_string(spec.seed);
    ps.dtype = spec.dtype;
    if (spec.grid_h == 0 && spec.grid_w == 0) {
        std::tie(ps.grid_h, ps.grid_w) = square_grid(spec.n_patches);
    } else {
        ps.grid_h = spec.grid_h;
        ps.grid_w = spec.grid_w;
    }
    ps.data = std::move(data);
    return out;
}

std::vector<SynthResult> synth_corpus(const SynthCorpusSpec& spec) {
    if (spec.count < 0 || spec.min_clusters < 1 || spec.max_clusters < spec.min_clusters ||
        spec.max_noise < spec.min_noise || !(spec.row_scale > 0.0)) {
        throw ParameterError("invalid synthetic corpus spec");
    }
    Rng rng(spec.seed);
    std::vector<SynthResult> out;
    out.reserve(static_cast<std::size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        SynthSpec one;
        one.n_patches = spec.n_patches;
        one.dim = spec.dim;
        one.n_true_clusters =
            spec.min_clusters + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_clusters - spec.min_clusters + 1)));
        one.within_cluster_noise = spec.min_noise + (spec.max_noise - spec.min_noise) * rng.uniform();
        one.anchor_max_similarity = spec.anchor_max_similarity;
        one.dtype = spec.dtype;
        one.seed = rng.next_u64();
        auto result = synth_clustered(one);
        if (spec.row_scale != 1.0) {
            result.patches.data *= spec.row_scale;
            if (spec.dtype == Dtype::kF32) {
                result.patches.data = result.patches.data.unaryExpr([](double v) { return double(float(v)); });
            }
        }
        char name[16];
        std::snprintf(name, sizeof(name), "img-%03d", i);
        result.patches.id = name;
        out.push_back(std::move(result));
    }
    return out;
}

}  // namespace divt
