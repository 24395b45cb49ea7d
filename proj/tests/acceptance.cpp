// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cli_harness.hpp"
#include "divt/clustering.hpp"
#include "divt/embedding_io.hpp"
#include "divt/gradcheck.hpp"
#include "divt/metrics.hpp"
#include "divt/oracle.hpp"
#include "divt/random.hpp"
#include "divt/similarity.hpp"
#include "divt/token_former.hpp"
#include "divt/training.hpp"
#include "test_support.hpp"
#include "training_fixture.hpp"

using namespace divt;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

const double kThetas[] = {0.3, 0.5, 0.65, 0.75, 0.8};

Outcome oracle_equivalence() {
    const auto t0 = Clock::now();
    Rng rng(1001);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto s = cosine_matrix(testing::random_instance(rng, 32, 16));
        const double theta = kThetas[rng.below(5)];
        if (select_centroids(s, {theta}) != oracle::brute_force_centroids(s, theta)) ++mismatches;
    }
    const double dt = seconds_since(t0);
    return {mismatches == 0 && dt < 10.0,
            std::to_string(mismatches) + " mismatches in 1000 instances, " + fmt("%.2f s", dt) + " (limit 10 s)"};
}

Outcome partition_separation() {
    Rng rng(1002);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto ps = testing::random_instance(rng, 64, 16);
        const double theta = kThetas[rng.below(5)];
        const auto policy = trial % 2 ? DegreePolicy::kRecompute : DegreePolicy::kStatic;
        const auto s = cosine_matrix(ps);
        const auto cl = cluster(s, ps.grid_h, ps.grid_w, {theta, policy});
        const Index n = ps.n_patches();
        const Index k = cl.k();
        // (a) every patch maps to one valid cluster and no cluster is empty
        std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
        if (static_cast<Index>(cl.assignment.size()) != n) ++violations;
        for (Index a : cl.assignment) {
            if (a < 0 || a >= k) {
                ++violations;
            } else {
                ++sizes[static_cast<std::size_t>(a)];
            }
        }
        violations += static_cast<int>(std::count(sizes.begin(), sizes.end(), 0));
        for (Index a = 0; a < k; ++a) {
            // (c) every centroid sits in its own cluster
            if (cl.assignment[static_cast<std::size_t>(cl.centroids[a])] != a) ++violations;
            // (b) centroids are pairwise at most theta apart
            for (Index b = a + 1; b < k; ++b)
                if (s(cl.centroids[a], cl.centroids[b]) > theta) ++violations;
        }
    }
    return {violations == 0, std::to_string(violations) + " violations in 1000 clusterings"};
}

Outcome trivial_budgets() {
    Rng rng(1003);
    int failures = 0;
    int checks = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 1 + static_cast<Index>(rng.below(40));
        const Index d = 1 + static_cast<Index>(rng.below(16));
        PatchSet same;
        same.data = Matrix(n, d);
        Vector row(d);
        for (Index t = 0; t < d; ++t) row(t) = rng.normal();
        for (Index i = 0; i < n; ++i) same.data.row(i) = row.transpose() * (0.5 + rng.uniform());
        same.grid_h = 1;
        same.grid_w = static_cast<int>(n);

        // mutually dissimilar: orthogonal directions (off-diagonal similarity 0)
        const Index m = 1 + static_cast<Index>(rng.below(32));
        PatchSet apart;
        apart.data = Matrix::Identity(m, m) * (1.0 + rng.uniform());
        apart.grid_h = 1;
        apart.grid_w = static_cast<int>(m);

        for (int step = 1; step < 100; step += 7) {
            const double theta = step / 100.0;
            ++checks;
            if (cluster(same, {theta}).k() != 1) ++failures;
            ++checks;
            if (cluster(apart, {theta}).k() != m) ++failures;
        }
    }
    return {failures == 0, std::to_string(failures) + " failures in " + std::to_string(checks) + " checks"};
}

Outcome theta_monotonicity() {
    const auto t0 = Clock::now();
    SynthCorpusSpec spec;
    spec.count = 200;
    spec.n_patches = 64;
    spec.dim = 16;
    spec.min_clusters = 2;
    spec.max_clusters = 8;
    spec.min_noise = 0.1;
    spec.max_noise = 0.4;
    spec.seed = 2024;
    std::vector<PatchSet> corpus;
    for (auto& s : synth_corpus(spec)) corpus.push_back(std::move(s.patches));
    const auto report = theta_sweep(corpus, {0.3, 0.4, 0.5, 0.65, 0.75});
    bool nondecreasing = true;
    int strict = 0;
    std::string means;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        means += (i ? " " : "") + fmt("%.3f", report.rows[i].mean);
        if (i == 0) continue;
        if (report.rows[i].mean < report.rows[i - 1].mean) nondecreasing = false;
        if (report.rows[i].mean > report.rows[i - 1].mean) ++strict;
    }
    const double dt = seconds_since(t0);
    return {nondecreasing && strict >= 3 && dt < 30.0,
            "mean K " + means + "; " + std::to_string(strict) + "/4 strict steps, " + fmt("%.2f s", dt) +
                " (limit 30 s)"};
}

TokenFormerParams random_params(Rng& rng, Index d, Index n, ScalePolicy policy) {
    const Index d_att = 1 + static_cast<Index>(rng.below(8));
    const Index d_hidden = 1 + static_cast<Index>(rng.below(8));
    const Index d_out = 1 + static_cast<Index>(rng.below(6));
    auto p = init_params({d, d_att, d_hidden, d_out, n + static_cast<Index>(rng.below(4))}, rng.next_u64(), 0.5,
                         policy);
    for (Index i = 0; i < p.b1.size(); ++i) p.b1(i) = 0.1 * rng.normal();
    for (Index i = 0; i < p.b2.size(); ++i) p.b2(i) = 0.1 * rng.normal();
    return p;
}

Outcome mask_locality() {
    Rng rng(1005);
    int changed = 0;
    double worst_row_sum = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto ps = testing::random_instance(rng, 32, 12, 2);
        const auto cl = cluster(ps, {kThetas[rng.below(5)]});
        const auto p = random_params(rng, ps.dim(), ps.n_patches(), trial % 2 ? ScalePolicy::kScaled
                                                                              : ScalePolicy::kUnscaled);
        const auto base = form_tokens(ps, cl, p);
        const auto w = attention_weights(ps, cl, p);
        for (Index k = 0; k < cl.k(); ++k) worst_row_sum = std::max(worst_row_sum, std::abs(w.row(k).sum() - 1.0));
        // perturb every patch in turn, assignment held fixed
        for (Index j = 0; j < ps.n_patches(); ++j) {
            auto moved = ps;
            for (Index t = 0; t < ps.dim(); ++t) moved.data(j, t) += rng.normal();
            const auto after = form_tokens(moved, cl, p);
            for (Index k = 0; k < cl.k(); ++k) {
                if (cl.assignment[static_cast<std::size_t>(j)] == k) continue;
                if ((after.tokens.row(k) - base.tokens.row(k)).cwiseAbs().maxCoeff() != 0.0) ++changed;
            }
        }
    }
    return {changed == 0 && worst_row_sum <= 1e-12,
            std::to_string(changed) + " out-of-cluster changes; max |row sum - 1| = " + fmt("%.1e", worst_row_sum) +
                " (limit 1e-12)"};
}

Outcome attention_oracle() {
    Rng rng(1006);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto ps = testing::random_instance(rng, 32, 12);
        const auto cl = cluster(ps, {kThetas[rng.below(5)]});
        for (auto policy : {ScalePolicy::kScaled, ScalePolicy::kUnscaled}) {
            const auto p = random_params(rng, ps.dim(), ps.n_patches(), policy);
            const auto fast = form_tokens(ps, cl, p).tokens;
            const auto slow = oracle::naive_attention(ps, cl, p).tokens;
            worst = std::max(worst, (fast - slow).cwiseAbs().maxCoeff());
        }
    }
    return {worst <= 1e-12, "max |form_tokens - naive| = " + fmt("%.2e", worst) + " over 200 instances x 2 policies"};
}

Outcome gradient_check() {
    const auto t0 = Clock::now();
    Rng rng(1007);
    double worst = 0.0;
    int failed = 0;
    int singleton_cases = 0;
    int one_cluster_cases = 0;
    for (int trial = 0; trial < 50; ++trial) {
        int n = 2 + static_cast<int>(rng.below(23));
        const int d = 2 + static_cast<int>(rng.below(7));
        double theta = kThetas[rng.below(5)];
        switch (trial % 5) {
            case 0: n = 1; break;          // single patch
            case 1: theta = -0.99; break;  // everything in one cluster
            case 2: theta = 0.999; break;  // (nearly) all singletons
            default: break;
        }
        const auto policy = trial % 2 ? ScalePolicy::kUnscaled : ScalePolicy::kScaled;
        const auto inst = random_gradcheck_instance(n, d, theta, rng.next_u64(), policy);
        const auto& cl = inst.clustering;
        bool has_singleton = false;
        for (Index k = 0; k < cl.k(); ++k) has_singleton = has_singleton || cl.members(k).size() == 1;
        singleton_cases += has_singleton;
        one_cluster_cases += (cl.k() == 1 && n > 1);
        const auto rep = gradcheck(inst.patches, cl, inst.params, inst.probe, {1e-5, 1e-4, 1e-7, true});
        worst = std::max(worst, rep.max_rel_error);
        failed += !rep.passed;
    }
    const double dt = seconds_since(t0);
    return {failed == 0 && worst < 1e-4 && singleton_cases > 0 && one_cluster_cases > 0 && dt < 60.0,
            "max rel error " + fmt("%.2e", worst) + " (limit 1e-4), " + std::to_string(failed) + " failing, " +
                std::to_string(singleton_cases) + " with singletons, " + std::to_string(one_cluster_cases) +
                " all-one-cluster, " + fmt("%.2f s", dt) + " (limit 60 s)"};
}

Outcome surrogate_training() {
    const auto corpus = testing::training_corpus();
    const auto init = testing::training_init();

    TrainConfig fixed;
    fixed.steps = 500;
    fixed.learning_rate = 1e-2;
    const auto a = fit(corpus, fixed, init);
    const double ratio = a.loss_trace.back() / a.loss_trace.front();

    TrainConfig mixed = fixed;
    mixed.thetas = {0.5, 0.65, 0.75};
    mixed.randomize_theta = true;
    bool diverged = false;
    bool below = true;
    std::string post;
    try {
        const auto b = fit(corpus, mixed, init);
        for (double theta : mixed.thetas) {
            const double before = evaluate_loss(corpus, init, b.target, theta);
            const double after = evaluate_loss(corpus, b.params, b.target, theta);
            below = below && after < before;
            post += " " + fmt("%.3g", theta) + ":" + fmt("%.3g", before) + "->" + fmt("%.3g", after);
        }
    } catch (const TrainingDiverged&) {
        diverged = true;
    }
    return {ratio < 0.2 && !diverged && below,
            "fixed-theta final/initial " + fmt("%.4f", ratio) + " (limit 0.2); randomized " +
                (diverged ? std::string("DIVERGED") : "post-hoc loss" + post)};
}

Outcome kv_anchors() {
    const auto p = ModelProfile::llama_7b();
    const auto one = kv_cache_bytes(1, p);
    const double full = kv_cache_megabytes(576, p);
    return {one == 524288 && full == 288.0,
            "1 token = " + std::to_string(one) + " B, 576 tokens = " + fmt("%.1f", full) + " MB"};
}

Outcome ground_truth_recovery() {
    Rng rng(1010);
    int exact_fail = 0;
    int noisy_good = 0;
    double worst_noisy = 1.0;
    const int images = 200;
    for (int i = 0; i < images; ++i) {
        SynthSpec spec;
        spec.n_patches = 64;
        spec.dim = 32;
        spec.n_true_clusters = 2 + static_cast<int>(rng.below(7));
        spec.anchor_max_similarity = 0.5;
        spec.within_cluster_noise = 0.0;
        spec.seed = rng.next_u64();
        const auto clean = synth_clustered(spec);
        if (adjusted_rand_index(cluster(clean.patches, {0.65}).assignment, clean.labels) != 1.0) ++exact_fail;

        spec.within_cluster_noise = 0.05;
        const auto noisy = synth_clustered(spec);
        const double ari = adjusted_rand_index(cluster(noisy.patches, {0.65}).assignment, noisy.labels);
        worst_noisy = std::min(worst_noisy, ari);
        noisy_good += ari > 0.95;
    }
    const double frac = static_cast<double>(noisy_good) / images;
    return {exact_fail == 0 && frac >= 0.95,
            "zero noise: " + std::to_string(exact_fail) + "/200 below ARI 1; noise 0.05: " + fmt("%.1f%%", 100 * frac) +
                " above 0.95 (need 95%), min ARI " + fmt("%.4f", worst_noisy)};
}

Outcome cli_determinism() {
    const auto base = std::filesystem::temp_directory_path() / "divt_acceptance_cli";
    std::size_t files = 0;
    int mismatched = 0;
    std::vector<std::map<std::string, std::string>> runs;
    for (int threads : {1, 4, 1, 4}) {
        runs.push_back(testing::golden_artifacts(base / ("t" + std::to_string(runs.size())), threads));
    }
    for (const auto& [name, bytes] : runs.front()) {
        ++files;
        const auto golden = testing::golden_dir() / name;
        if (!std::filesystem::exists(golden) || testing::slurp(golden) != bytes) ++mismatched;
        for (const auto& r : runs)
            if (r.at(name) != bytes) ++mismatched;
    }
    std::filesystem::remove_all(base);
    return {mismatched == 0 && files > 0, std::to_string(files) + " golden files x 4 runs (threads 1,4,1,4), " +
                                              std::to_string(mismatched) + " byte mismatches"};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"oracle equivalence", oracle_equivalence},
        {"partition and separation", partition_separation},
        {"trivial budgets", trivial_budgets},
        {"theta monotonicity", theta_monotonicity},
        {"mask locality", mask_locality},
        {"attention oracle", attention_oracle},
        {"gradient check", gradient_check},
        {"surrogate training", surrogate_training},
        {"kv-cache anchors", kv_anchors},
        {"ground-truth recovery", ground_truth_recovery},
        {"cli determinism", cli_determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
