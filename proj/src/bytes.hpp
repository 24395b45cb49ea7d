// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Little-endian encode/decode helpers shared by the binary formats.

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "divt/errors.hpp"

namespace divt::detail {

class ByteWriter {
public:
    void magic(const char (&tag)[5]) {
        for (int i = 0; i < 4; ++i) m_out.push_back(static_cast<std::byte>(tag[i]));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) m_out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) m_out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void reserve(std::size_t n) { m_out.reserve(n); }

    std::vector<std::byte> take() { return std::move(m_out); }

private:
    std::vector<std::byte> m_out;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> bytes) : m_bytes(bytes) {}

    bool magic_is(const char (&tag)[5]) {
        need(4, "magic");
        bool ok = true;
        for (int i = 0; i < 4; ++i) ok = ok && m_bytes[m_pos + i] == static_cast<std::byte>(tag[i]);
        m_pos += 4;
        return ok;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(m_bytes[m_pos + i]) << (8 * i);
        m_pos += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::to_integer<std::uint64_t>(m_bytes[m_pos + i]) << (8 * i);
        m_pos += 8;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

    std::size_t remaining() const { return m_bytes.size() - m_pos; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw FormatError(FormatError::Kind::kTruncated,
                              std::string("truncated file while reading ") + what + ": need " +
                                  std::to_string(n) + " bytes, have " + std::to_string(remaining()));
        }
    }

    void expect_end() const {
        if (remaining() != 0) {
            throw FormatError(FormatError::Kind::kTrailingBytes,
                              std::to_string(remaining()) + " trailing bytes after payload");
        }
    }

private:
    std::span<const std::byte> m_bytes;
    std::size_t m_pos = 0;
};

}  // namespace divt::detail
