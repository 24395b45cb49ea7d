// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#include "divt/fileio.hpp"

#include <fstream>
#include <system_error>

#include "divt/errors.hpp"

namespace divt {

std::vector<std::byte> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    if (size < 0) {
        throw IoError("cannot determine size of " + path.string());
    }
    in.seekg(0, std::ios::beg);
    std::vector<std::byte> bytes(static_cast<std::size_t>(size));
    if (!bytes.empty() && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
        throw IoError("short read on " + path.string());
    }
    return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out.write(reinterpret_cast<const char*>(contents.data()), static_cast<std::streamsize>(contents.size()));
        if (!out.flush()) {
            throw IoError("write failed on " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename into " + path.string());
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    write_file_atomic(path, std::as_bytes(std::span(contents.data(), contents.size())));
}

}  // namespace divt
