// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace divt {

/// Whole file contents. Throws IoError if the file cannot be read.
std::vector<std::byte> read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> contents);
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace divt
