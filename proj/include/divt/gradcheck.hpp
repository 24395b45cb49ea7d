// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "divt/clustering.hpp"
#include "divt/token_former.hpp"

namespace divt {

struct GradcheckOptions {
    double eps = 1e-5;
    double rtol = 1e-4;
    double atol = 1e-7;
    bool check_inputs = true;
};

struct GradcheckReport {
    double max_rel_error = 0.0;  // max over coordinates of |a - n| / max(|a|, |n|, atol / rtol)
    double max_abs_error = 0.0;
    Index coordinates = 0;
    bool passed = false;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
/// dominating; with floor = atol / rtol, "rel < rtol" means |a - n| < max(rtol * max(|a|, |n|), atol).
double gradient_relative_error(double analytic, double numeric, double floor);

/// Compares backward() against central differences of the linear probe
/// loss <probe, form_tokens(ps, cl, params)> for every parameter and,
/// optionally, every input coordinate.
GradcheckReport gradcheck(const PatchSet& ps, const Clustering& cl, const TokenFormerParams& params,
                          const Matrix& probe, const GradcheckOptions& opts = {});

struct GradcheckInstance {
    PatchSet patches;
    Clustering clustering;
    TokenFormerParams params;
    Matrix probe;
};

/// Random f64 instance: clustered synthetic patches, params with std 0.5 and
/// n_max = n, Gaussian probe.
GradcheckInstance random_gradcheck_instance(int n, int d, double theta, std::uint64_t seed,
                                            ScalePolicy policy = ScalePolicy::kScaled);

}  // namespace divt
