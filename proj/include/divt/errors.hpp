// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace divt {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// On-disk bytes do not follow the declared binary layout.
class FormatError : public Error {
public:
    enum class Kind { kBadMagic, kBadVersion, kBadDtype, kBadHeader, kTruncated, kTrailingBytes };

    FormatError(Kind kind, const std::string& what) : Error(what), m_kind(kind) {}
    Kind kind() const { return m_kind; }

private:
    Kind m_kind;
};

/// Payload decoded fine but holds a non-finite value.
class ValidationError : public Error {
public:
    ValidationError(std::int64_t row, std::int64_t col, const std::string& what)
        : Error(what), m_row(row), m_col(col) {}
    std::int64_t row() const { return m_row; }
    std::int64_t col() const { return m_col; }

private:
    std::int64_t m_row;
    std::int64_t m_col;
};

/// Out-of-range scalar parameter, bad dimensions or inconsistent shapes.
class ParameterError : public Error {
public:
    using Error::Error;
};

}  // namespace divt
