// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace divt {

/// Worker count: DIVT_THREADS if set to a positive integer, else hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n) on up to thread_count() threads.
///
/// Each index is visited exactly once; callers write results into slot i so
/// the outcome does not depend on scheduling. The first exception thrown by
/// any body is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace divt
