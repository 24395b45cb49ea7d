// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#include "divt/export.hpp"

#include <charconv>
#include <string>

#include "divt/errors.hpp"

namespace divt {

std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

nlohmann::ordered_json cluster_map_to_json(const ClusterMap& map) {
    nlohmann::ordered_json j;
    j["id"] = map.id;
    j["theta"] = map.theta;
    j["grid_h"] = map.grid_h;
    j["grid_w"] = map.grid_w;
    j["k"] = map.clustering.k();
    j["centroids"] = map.clustering.centroids;
    j["assignment"] = map.clustering.assignment;
    return j;
}

ClusterMap cluster_map_from_json(const nlohmann::ordered_json& j) {
    ClusterMap map;
    try {
        map.id = j.value("id", std::string{});
        map.theta = j.value("theta", 0.0);
        map.grid_h = j.at("grid_h").get<int>();
        map.grid_w = j.at("grid_w").get<int>();
        map.clustering.centroids = j.at("centroids").get<std::vector<Index>>();
        map.clustering.assignment = j.at("assignment").get<std::vector<Index>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed cluster JSON: ") + e.what());
    }
    const Index n = static_cast<Index>(map.grid_h) * map.grid_w;
    if (map.grid_h < 1 || map.grid_w < 1 || n != map.clustering.n_patches()) {
        throw ParameterError("cluster JSON grid " + std::to_string(map.grid_h) + "x" + std::to_string(map.grid_w) +
                             " does not match " + std::to_string(map.clustering.n_patches()) + " assignments");
    }
    if (j.contains("k") && j.at("k").get<Index>() != map.clustering.k()) {
        throw ParameterError("cluster JSON k disagrees with its centroid list");
    }
    map.clustering.validate(n);
    return map;
}

nlohmann::ordered_json matrix_to_json(const Matrix& m) {
    auto out = nlohmann::ordered_json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::ordered_json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

std::string matrix_csv(const Matrix& m) {
    std::string out;
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            if (c) out += ',';
            out += format_double(m(r, c));
        }
        out += '\n';
    }
    return out;
}

std::string profile_csv(std::span<const LayerSimilarity> profile) {
    std::string out = "layer,mean_similarity,stddev\n";
    for (const auto& row : profile) {
        out += std::to_string(row.layer) + ',' + format_double(row.mean_similarity) + ',' +
               format_double(row.stddev) + '\n';
    }
    return out;
}

std::string sweep_csv(const SweepReport& report) {
    std::string out = "theta,mean,std,min,max\n";
    for (const auto& row : report.rows) {
        out += format_double(row.theta) + ',' + format_double(row.mean) + ',' + format_double(row.stddev) + ',' +
               std::to_string(row.min) + ',' + std::to_string(row.max) + '\n';
    }
    return out;
}

nlohmann::ordered_json sweep_json(const SweepReport& report) {
    nlohmann::ordered_json j;
    j["stddev"] = "population";
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) {
        nlohmann::ordered_json r;
        r["theta"] = row.theta;
        r["mean"] = row.mean;
        r["std"] = row.stddev;
        r["min"] = row.min;
        r["max"] = row.max;
        r["kv_cache_mb_llama_7b"] = row.mean * kv_cache_megabytes(1, ModelProfile::llama_7b());
        r["counts"] = row.counts;
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j;
}

std::string loss_trace_csv(std::span<const double> trace) {
    std::string out = "step,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) out += std::to_string(i) + ',' + format_double(trace[i]) + '\n';
    return out;
}

std::array<std::uint8_t, 3> cluster_color(Index k) {
    static constexpr std::array<std::array<std::uint8_t, 3>, kPaletteSize> kPalette{{
        {31, 119, 180},  {255, 127, 14},  {44, 160, 44},   {214, 39, 40},   {148, 103, 189},
        {140, 86, 75},   {227, 119, 194}, {127, 127, 127}, {188, 189, 34},  {23, 190, 207},
        {174, 199, 232}, {255, 187, 120}, {152, 223, 138}, {255, 152, 150}, {197, 176, 213},
        {196, 156, 148}, {247, 182, 210}, {199, 199, 199}, {219, 219, 141}, {158, 218, 229},
    }};
    return kPalette[static_cast<std::size_t>(k % kPaletteSize)];
}

std::vector<std::uint8_t> render_ppm(const ClusterMap& map, int scale) {
    if (scale < 1) throw ParameterError("render scale must be >= 1");
    map.clustering.validate(static_cast<Index>(map.grid_h) * map.grid_w);
    const int width = map.grid_w * scale;
    const int height = map.grid_h * scale;
    const std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + static_cast<std::size_t>(width) * height * 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Index patch = static_cast<Index>(y / scale) * map.grid_w + x / scale;
            const auto rgb = cluster_color(map.clustering.assignment[static_cast<std::size_t>(patch)]);
            out.insert(out.end(), rgb.begin(), rgb.end());
        }
    }
    return out;
}

}  // namespace divt
