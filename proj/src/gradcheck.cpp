// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#include "divt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "divt/oracle.hpp"
#include "divt/random.hpp"

namespace divt {

double gradient_relative_error(double analytic, double numeric, double floor) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

GradcheckReport gradcheck(const PatchSet& ps, const Clustering& cl, const TokenFormerParams& params,
                          const Matrix& probe, const GradcheckOptions& opts) {
    const auto grads = backward(ps, cl, params, probe);
    const double floor = opts.atol / opts.rtol;
    GradcheckReport report;

    auto compare = [&](const std::vector<double>& analytic, const std::vector<double>& numeric) {
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            report.max_rel_error =
                std::max(report.max_rel_error, gradient_relative_error(analytic[i], numeric[i], floor));
            report.max_abs_error = std::max(report.max_abs_error, std::abs(analytic[i] - numeric[i]));
        }
        report.coordinates += static_cast<Index>(analytic.size());
    };

    {
        TokenFormerParams scratch = params;
        const auto numeric = oracle::finite_diff_grad(
            [&](std::span<const double> flat) {
                scratch.assign_flat(flat);
                return (probe.array() * form_tokens(ps, cl, scratch).tokens.array()).sum();
            },
            params.flatten(), opts.eps);
        compare(grads.params.flatten(), numeric);
    }

    if (opts.check_inputs) {
        PatchSet scratch = ps;
        std::vector<double> x(ps.data.data(), ps.data.data() + ps.data.size());
        const auto numeric = oracle::finite_diff_grad(
            [&](std::span<const double> flat) {
                std::copy(flat.begin(), flat.end(), scratch.data.data());
                return (probe.array() * form_tokens(scratch, cl, params).tokens.array()).sum();
            },
            x, opts.eps);
        compare(std::vector<double>(grads.inputs.data(), grads.inputs.data() + grads.inputs.size()), numeric);
    }

    report.passed = report.max_rel_error < opts.rtol;
    return report;
}

GradcheckInstance random_gradcheck_instance(int n, int d, double theta, std::uint64_t seed, ScalePolicy policy) {
    Rng rng(seed);
    SynthSpec spec;
    spec.n_patches = n;
    spec.dim = d;
    spec.n_true_clusters = std::max(1, n / 4);
    spec.within_cluster_noise = 0.3;
    spec.seed = rng.next_u64();
    GradcheckInstance inst;
    inst.patches = synth_clustered(spec).patches;
    inst.patches.id = "gradcheck";
    inst.clustering = cluster(inst.patches, GranularityConfig{theta});

    TokenFormerDims dims{d, 5, 7, 4, n};
    inst.params = init_params(dims, rng.next_u64(), 0.5, policy);
    for (Index i = 0; i < inst.params.b1.size(); ++i) inst.params.b1(i) = rng.normal(0.0, 0.5);
    for (Index i = 0; i < inst.params.b2.size(); ++i) inst.params.b2(i) = rng.normal(0.0, 0.5);
    inst.probe.resize(inst.clustering.k(), dims.d_out);
    for (Index i = 0; i < inst.probe.size(); ++i) inst.probe.data()[i] = rng.normal();
    return inst;
}

}  // namespace divt
