// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "divt/clustering.hpp"
#include "divt/fileio.hpp"
#include "divt/metrics.hpp"
#include "divt/similarity.hpp"
#include "divt/token_former.hpp"

namespace divt {

/// Shortest round-trip decimal form of x.
std::string format_double(double x);

/// A clustering together with the grid it was computed on.
struct ClusterMap {
    std::string id;
    double theta = 0.0;
    int grid_h = 0;
    int grid_w = 0;
    Clustering clustering;
};

nlohmann::ordered_json cluster_map_to_json(const ClusterMap& map);

/// Throws ParameterError on missing fields or a grid that does not match the assignment.
ClusterMap cluster_map_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json matrix_to_json(const Matrix& m);

std::string matrix_csv(const Matrix& m);
std::string profile_csv(std::span<const LayerSimilarity> profile);
std::string sweep_csv(const SweepReport& report);
nlohmann::ordered_json sweep_json(const SweepReport& report);
std::string loss_trace_csv(std::span<const double> trace);

/// Binary PPM (P6); each patch is a scale x scale block coloured by its cluster.
std::vector<std::uint8_t> render_ppm(const ClusterMap& map, int scale = 8);

/// Colour of cluster k; a fixed 20-entry table, cycled.
std::array<std::uint8_t, 3> cluster_color(Index k);
inline constexpr Index kPaletteSize = 20;

}  // namespace divt
