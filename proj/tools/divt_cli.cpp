// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

// divt: command-line front end for the clustering tokenizer.
//
// Exit codes: 0 success, 1 check failure, 2 input/format error, 3 parameter error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "divt/clustering.hpp"
#include "divt/embedding_io.hpp"
#include "divt/errors.hpp"
#include "divt/export.hpp"
#include "divt/gradcheck.hpp"
#include "divt/metrics.hpp"
#include "divt/parallel.hpp"
#include "divt/random.hpp"
#include "divt/similarity.hpp"
#include "divt/token_former.hpp"
#include "divt/training.hpp"

namespace fs = std::filesystem;
using divt::format_double;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kInputError = 2, kParamError = 3 };

// Carries an exit code and a message up to main().
struct Failure {
    int code;
    std::string message;
};

[[noreturn]] void fail(int code, std::string message) { throw Failure{code, std::move(message)}; }

int exit_code_for(const divt::Error& e) {
    if (dynamic_cast<const divt::ParameterError*>(&e)) return kParamError;
    return kInputError;
}

std::string with_path(const fs::path& path, const std::string& what) {
    const std::string p = path.string();
    return what.rfind(p, 0) == 0 ? what : p + ": " + what;
}

// Files with the given extension, sorted by name. A directory argument is
// expanded; a file argument is taken as is.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& args, const std::string& ext) {
    std::vector<fs::path> out;
    for (const auto& a : args) {
        const fs::path p(a);
        std::error_code ec;
        if (fs::is_directory(p, ec)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p)) {
                if (entry.is_regular_file() && entry.path().extension() == ext) found.push_back(entry.path());
            }
            std::sort(found.begin(), found.end());
            if (found.empty()) fail(kInputError, p.string() + ": no " + ext + " files in directory");
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::exists(p, ec)) {
            out.push_back(p);
        } else {
            fail(kInputError, p.string() + ": no such file or directory");
        }
    }
    if (out.empty()) fail(kInputError, "no inputs");
    return out;
}

std::vector<divt::PatchSet> load_corpus(const std::vector<fs::path>& paths) {
    std::vector<divt::PatchSet> corpus(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        try {
            corpus[i] = divt::load_patch_set(paths[i]);
        } catch (const divt::Error& e) {
            fail(exit_code_for(e), with_path(paths[i], e.what()));
        }
    }
    return corpus;
}

void check_theta(double theta) {
    if (!(theta > -1.0 && theta < 1.0)) fail(kParamError, "--theta must lie in (-1, 1), got " + format_double(theta));
}

divt::DegreePolicy parse_degree_policy(const std::string& s) {
    if (s == "static") return divt::DegreePolicy::kStatic;
    if (s == "recompute") return divt::DegreePolicy::kRecompute;
    fail(kParamError, "--degree-policy must be static or recompute, got " + s);
}

divt::ScalePolicy parse_scale_policy(const std::string& s) {
    if (s == "scaled") return divt::ScalePolicy::kScaled;
    if (s == "unscaled") return divt::ScalePolicy::kUnscaled;
    fail(kParamError, "--scale must be scaled or unscaled, got " + s);
}

json string_array(const std::vector<fs::path>& paths) {
    json a = json::array();
    for (const auto& p : paths) a.push_back(p.generic_string());
    return a;
}

void write_text(const fs::path& path, const std::string& text) {
    try {
        divt::write_file_atomic(path, text);
    } catch (const divt::Error& e) {
        fail(kInputError, with_path(path, e.what()));
    }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Writes <out>.manifest.json. No timestamps or host data, so reruns are byte-identical.
void write_manifest(const fs::path& out, const std::string& command, const std::vector<fs::path>& inputs,
                    json config, std::optional<std::uint64_t> seed, const std::vector<fs::path>& outputs) {
    json m;
    m["command"] = command;
    m["tool_version"] = kToolVersion;
    m["inputs"] = string_array(inputs);
    m["config"] = std::move(config);
    if (seed) {
        m["seed"] = *seed;
    } else {
        m["seed"] = nullptr;
    }
    m["outputs"] = string_array(outputs);
    fs::path manifest = out;
    manifest += ".manifest.json";
    write_json(manifest, m);
}

json granularity_json(const divt::GranularityConfig& g) {
    json j;
    j["theta"] = g.theta;
    j["degree_policy"] = g.degree_policy == divt::DegreePolicy::kStatic ? "static" : "recompute";
    return j;
}

std::vector<double> parse_theta_list(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t comma = std::min(s.find(',', pos), s.size());
        const std::string item = s.substr(pos, comma - pos);
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            fail(kParamError, "--thetas: cannot parse \"" + item + "\"");
        }
        pos = comma + 1;
    }
    for (double t : out) check_theta(t);
    return out;
}

// ---------------------------------------------------------------- tokenize

struct TokenizeOptions {
    std::vector<std::string> inputs;
    double theta = 0.65;
    std::string degree_policy = "static";
    std::string params_path;
    std::uint64_t seed = 0;
    int d_att = 64;
    int d_hidden = 64;
    int d_out = 64;
    std::string scale = "scaled";
    std::string out;
    bool attention = false;
};

struct TokenizeResult {
    divt::ClusterMap map;
    divt::TokenSequence tokens;
    divt::Matrix attention;
};

int run_tokenize(const TokenizeOptions& o) {
    check_theta(o.theta);
    const divt::GranularityConfig cfg{o.theta, parse_degree_policy(o.degree_policy)};
    const auto scale = parse_scale_policy(o.scale);
    const auto inputs = expand_inputs(o.inputs, ".divt");
    const auto corpus = load_corpus(inputs);

    divt::TokenFormerParams params;
    if (!o.params_path.empty()) {
        try {
            params = divt::load_params(o.params_path);
        } catch (const divt::Error& e) {
            fail(exit_code_for(e), with_path(o.params_path, e.what()));
        }
    } else {
        int n_max = 576;
        for (const auto& ps : corpus) n_max = std::max<int>(n_max, static_cast<int>(ps.n_patches()));
        const divt::TokenFormerDims dims{static_cast<int>(corpus.front().dim()), o.d_att, o.d_hidden, o.d_out, n_max};
        params = divt::init_params(dims, o.seed, 0.02, scale);
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (corpus[i].dim() != params.dims().d)
            fail(kParamError, inputs[i].string() + ": embedding width " + std::to_string(corpus[i].dim()) +
                                  " does not match parameter width " + std::to_string(params.dims().d));
        if (corpus[i].n_patches() > params.dims().n_max)
            fail(kParamError, inputs[i].string() + ": " + std::to_string(corpus[i].n_patches()) +
                                  " patches exceed the positional table (" + std::to_string(params.dims().n_max) +
                                  ")");
    }

    std::vector<TokenizeResult> results(corpus.size());
    divt::parallel_for(corpus.size(), [&](std::size_t i) {
        const auto& ps = corpus[i];
        auto& r = results[i];
        r.map = {ps.id, cfg.theta, ps.grid_h, ps.grid_w, divt::cluster(ps, cfg)};
        r.tokens = divt::form_tokens(ps, r.map.clustering, params);
        if (o.attention) r.attention = divt::attention_weights(ps, r.map.clustering, params);
    });

    const fs::path out_dir(o.out);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(kInputError, out_dir.string() + ": " + ec.message());

    std::vector<fs::path> outputs;
    for (const auto& r : results) {
        json j = divt::cluster_map_to_json(r.map);
        j["d_out"] = r.tokens.tokens.cols();
        j["tokens"] = divt::matrix_to_json(r.tokens.tokens);
        const fs::path jp = out_dir / (r.map.id + ".json");
        write_json(jp, j);
        outputs.push_back(jp);
        const fs::path cp = out_dir / (r.map.id + ".tokens.csv");
        write_text(cp, divt::matrix_csv(r.tokens.tokens));
        outputs.push_back(cp);
        if (o.attention) {
            const fs::path ap = out_dir / (r.map.id + ".attention.csv");
            write_text(ap, divt::matrix_csv(r.attention));
            outputs.push_back(ap);
        }
        std::printf("%s N=%lld K=%lld\n", r.map.id.c_str(), static_cast<long long>(r.map.clustering.n_patches()),
                    static_cast<long long>(r.map.clustering.k()));
    }

    json config = granularity_json(cfg);
    const auto dims = params.dims();
    config["params"] = o.params_path.empty() ? json(nullptr) : json(o.params_path);
    config["dims"] = {{"d", dims.d}, {"d_att", dims.d_att}, {"d_hidden", dims.d_hidden}, {"d_out", dims.d_out},
                      {"n_max", dims.n_max}};
    config["scale_policy"] = params.scale_policy == divt::ScalePolicy::kScaled ? "scaled" : "unscaled";
    write_manifest(out_dir, "tokenize", inputs, config,
                   o.params_path.empty() ? std::optional<std::uint64_t>(o.seed) : std::nullopt, outputs);
    return kOk;
}

// ---------------------------------------------------------------- sweep

struct SweepOptions {
    std::vector<std::string> inputs;
    std::string thetas = "0.3,0.4,0.5,0.65,0.75";
    std::string degree_policy = "static";
    std::string csv;
    std::string json_out;
};

int run_sweep(const SweepOptions& o) {
    const auto thetas = parse_theta_list(o.thetas);
    const auto policy = parse_degree_policy(o.degree_policy);
    const auto inputs = expand_inputs(o.inputs, ".divt");
    const auto corpus = load_corpus(inputs);
    const auto report = divt::theta_sweep(corpus, thetas, policy);

    const fs::path csv(o.csv);
    fs::path js = o.json_out.empty() ? fs::path(csv).replace_extension(".json") : fs::path(o.json_out);
    write_text(csv, divt::sweep_csv(report));
    json j = divt::sweep_json(report);
    json images = json::array();
    for (const auto& ps : corpus) images.push_back(ps.id);
    j["images"] = std::move(images);
    write_json(js, j);

    std::printf("%-8s %10s %10s %6s %6s %12s\n", "theta", "mean", "std", "min", "max", "kv_mb_7b");
    for (const auto& row : report.rows) {
        std::printf("%-8s %10.3f %10.3f %6lld %6lld %12.3f\n", format_double(row.theta).c_str(), row.mean,
                    row.stddev, static_cast<long long>(row.min), static_cast<long long>(row.max),
                    row.mean * divt::kv_cache_megabytes(1, divt::ModelProfile::llama_7b()));
    }

    json config;
    config["thetas"] = thetas;
    config["degree_policy"] = o.degree_policy;
    write_manifest(csv, "sweep", inputs, config, std::nullopt, {csv, js});
    return kOk;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeOptions {
    std::vector<std::string> inputs;
    std::string csv;
};

int run_analyze(const AnalyzeOptions& o) {
    const auto inputs = expand_inputs(o.inputs, ".divl");
    std::vector<divt::LayerwiseEmbeddings> all(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        try {
            all[i] = divt::load_layerwise(inputs[i]);
        } catch (const divt::Error& e) {
            fail(exit_code_for(e), with_path(inputs[i], e.what()));
        }
    }
    std::vector<divt::LayerSimilarity> profile;
    try {
        profile = all.size() == 1 ? divt::layerwise_similarity_profile(all.front())
                                  : divt::layerwise_similarity_profile(std::span<const divt::LayerwiseEmbeddings>(all));
    } catch (const divt::ParameterError& e) {
        // e.g. images with different layer counts, or a single-patch image
        fail(kInputError, e.what());
    }

    const fs::path csv(o.csv);
    write_text(csv, divt::profile_csv(profile));
    for (const auto& row : profile) {
        std::printf("layer %lld mean=%s std=%s\n", static_cast<long long>(row.layer),
                    format_double(row.mean_similarity).c_str(), format_double(row.stddev).c_str());
    }
    json config;
    config["images"] = all.size();
    write_manifest(csv, "analyze", inputs, config, std::nullopt, {csv});
    return kOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckOptions {
    int n = 16;
    int d = 8;
    double theta = 0.65;
    std::uint64_t seed = 0;
    double eps = 1e-5;
    std::string scale = "scaled";
};

int run_gradcheck(const GradcheckOptions& o) {
    check_theta(o.theta);
    if (o.n < 1 || o.d < 1) fail(kParamError, "--n and --d must be >= 1");
    if (!(o.eps > 0.0)) fail(kParamError, "--eps must be > 0");
    const auto inst = divt::random_gradcheck_instance(o.n, o.d, o.theta, o.seed, parse_scale_policy(o.scale));
    divt::GradcheckOptions opts;
    opts.eps = o.eps;
    const auto rep = divt::gradcheck(inst.patches, inst.clustering, inst.params, inst.probe, opts);
    std::printf("gradcheck n=%d d=%d K=%lld theta=%s seed=%llu eps=%s\n", o.n, o.d,
                static_cast<long long>(inst.clustering.k()), format_double(o.theta).c_str(),
                static_cast<unsigned long long>(o.seed), format_double(o.eps).c_str());
    std::printf("coordinates=%zu max_abs_error=%.3e max_rel_error=%.3e tolerance=%.1e\n", rep.coordinates,
                rep.max_abs_error, rep.max_rel_error, opts.rtol);
    std::printf("%s\n", rep.passed ? "PASS" : "FAIL");
    return rep.passed ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------- render

struct RenderOptions {
    std::string input;
    std::string ppm;
    int scale = 8;
};

int run_render(const RenderOptions& o) {
    if (o.scale < 1) fail(kParamError, "--scale must be >= 1");
    const fs::path in(o.input);
    divt::ClusterMap map;
    try {
        const auto bytes = divt::read_file(in);
        const std::string text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        map = divt::cluster_map_from_json(json::parse(text));
    } catch (const divt::Error& e) {
        // a malformed or inconsistent cluster file is an input problem
        fail(kInputError, with_path(in, e.what()));
    } catch (const json::exception& e) {
        fail(kInputError, with_path(in, e.what()));
    }
    const auto img = divt::render_ppm(map, o.scale);
    const fs::path out(o.ppm);
    try {
        divt::write_file_atomic(out, std::as_bytes(std::span(img)));
    } catch (const divt::Error& e) {
        fail(kInputError, with_path(out, e.what()));
    }
    std::printf("%s K=%lld %dx%d px\n", out.string().c_str(), static_cast<long long>(map.clustering.k()),
                map.grid_w * o.scale, map.grid_h * o.scale);
    return kOk;
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
    std::string out;
    int count = 8;
    int n_patches = 36;
    int dim = 16;
    int min_clusters = 2;
    int max_clusters = 6;
    double min_noise = 0.1;
    double max_noise = 0.1;
    double row_scale = 1.0;
    std::string dtype = "f64";
    std::uint64_t seed = 0;
};

int run_synth(const SynthOptions& o) {
    if (o.dtype != "f32" && o.dtype != "f64") fail(kParamError, "--dtype must be f32 or f64");
    divt::SynthCorpusSpec spec;
    spec.count = o.count;
    spec.n_patches = o.n_patches;
    spec.dim = o.dim;
    spec.min_clusters = o.min_clusters;
    spec.max_clusters = o.max_clusters;
    spec.min_noise = o.min_noise;
    spec.max_noise = o.max_noise;
    spec.row_scale = o.row_scale;
    spec.dtype = o.dtype == "f32" ? divt::Dtype::kF32 : divt::Dtype::kF64;
    spec.seed = o.seed;
    const auto images = divt::synth_corpus(spec);

    const fs::path dir(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(kInputError, dir.string() + ": " + ec.message());
    std::vector<fs::path> outputs;
    std::string labels = "image,patch,label\n";
    for (const auto& s : images) {
        const fs::path p = dir / (s.patches.id + ".divt");
        try {
            divt::save_patch_set(s.patches, p);
        } catch (const divt::Error& e) {
            fail(kInputError, with_path(p, e.what()));
        }
        outputs.push_back(p);
        for (std::size_t i = 0; i < s.labels.size(); ++i)
            labels += s.patches.id + "," + std::to_string(i) + "," + std::to_string(s.labels[i]) + "\n";
    }
    const fs::path lp = dir / "labels.csv";
    write_text(lp, labels);
    outputs.push_back(lp);

    json config = {{"count", o.count},          {"n_patches", o.n_patches},       {"dim", o.dim},
                   {"min_clusters", o.min_clusters}, {"max_clusters", o.max_clusters}, {"min_noise", o.min_noise},
                   {"max_noise", o.max_noise},  {"row_scale", o.row_scale},       {"dtype", o.dtype}};
    write_manifest(dir, "synth", {}, config, o.seed, outputs);
    std::printf("wrote %zu images to %s\n", images.size(), dir.string().c_str());
    return kOk;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    std::vector<std::string> inputs;
    std::string out;
    int steps = 500;
    double lr = 1e-2;
    int batch = 0;
    std::string thetas = "0.65";
    bool randomize = false;
    std::string target = "cluster-mean";
    int d_att = 64;
    int d_hidden = 64;
    int d_out = 64;
    std::string scale = "scaled";
    std::uint64_t seed = 0;
};

int run_train(const TrainOptions& o) {
    const auto inputs = expand_inputs(o.inputs, ".divt");
    const auto corpus = load_corpus(inputs);
    divt::TrainConfig cfg;
    cfg.steps = o.steps;
    cfg.learning_rate = o.lr;
    cfg.batch_size = o.batch;
    cfg.thetas = parse_theta_list(o.thetas);
    cfg.randomize_theta = o.randomize;
    cfg.seed = o.seed;
    if (o.target == "cluster-mean") {
        cfg.target_mode = divt::TargetMode::kClusterMean;
    } else if (o.target == "teacher") {
        cfg.target_mode = divt::TargetMode::kTeacherPooling;
    } else {
        fail(kParamError, "--target must be cluster-mean or teacher");
    }
    int n_max = 576;
    for (const auto& ps : corpus) n_max = std::max<int>(n_max, static_cast<int>(ps.n_patches()));
    const divt::TokenFormerDims dims{static_cast<int>(corpus.front().dim()), o.d_att, o.d_hidden, o.d_out, n_max};
    const auto init = divt::init_params(dims, divt::mix_seed(o.seed, 3), 0.02, parse_scale_policy(o.scale));

    divt::FitResult r;
    try {
        r = divt::fit(corpus, cfg, init);
    } catch (const divt::TrainingDiverged& e) {
        fail(kCheckFailed, e.what());
    }

    const fs::path out(o.out);
    try {
        divt::save_params(r.params, out);
    } catch (const divt::Error& e) {
        fail(kInputError, with_path(out, e.what()));
    }
    fs::path trace = out;
    trace += ".loss.csv";
    write_text(trace, divt::loss_trace_csv(r.loss_trace));
    std::printf("steps=%d initial_loss=%s final_loss=%s\n", o.steps, format_double(r.loss_trace.front()).c_str(),
                format_double(r.loss_trace.back()).c_str());

    json config = {{"steps", o.steps},     {"learning_rate", o.lr},   {"batch_size", o.batch},
                   {"thetas", cfg.thetas}, {"randomize_theta", o.randomize}, {"target", o.target},
                   {"d_att", o.d_att},     {"d_hidden", o.d_hidden},  {"d_out", o.d_out},
                   {"scale_policy", o.scale}};
    write_manifest(out, "train", inputs, config, o.seed, {out, trace});
    return kOk;
}

// ---------------------------------------------------------------- bench

struct BenchOptions {
    std::vector<std::string> inputs;
    double theta = 0.65;
    int repeat = 3;
    std::uint64_t seed = 0;
};

int run_bench(const BenchOptions& o) {
    check_theta(o.theta);
    if (o.repeat < 1) fail(kParamError, "--repeat must be >= 1");
    const auto inputs = expand_inputs(o.inputs, ".divt");
    const auto corpus = load_corpus(inputs);
    int n_max = 576;
    for (const auto& ps : corpus) n_max = std::max<int>(n_max, static_cast<int>(ps.n_patches()));
    const auto params = divt::init_params({static_cast<int>(corpus.front().dim()), 64, 64, 64, n_max}, o.seed);

    using clock = std::chrono::steady_clock;
    double best_cluster = 1e300;
    double best_total = 1e300;
    std::size_t tokens = 0;
    std::size_t patches = 0;
    for (int rep = 0; rep < o.repeat; ++rep) {
        tokens = 0;
        patches = 0;
        double cluster_s = 0.0;
        const auto t0 = clock::now();
        for (const auto& ps : corpus) {
            const auto c0 = clock::now();
            const auto cl = divt::cluster(ps, {o.theta});
            cluster_s += std::chrono::duration<double>(clock::now() - c0).count();
            const auto t = divt::form_tokens(ps, cl, params);
            tokens += static_cast<std::size_t>(t.k());
            patches += static_cast<std::size_t>(ps.n_patches());
        }
        best_total = std::min(best_total, std::chrono::duration<double>(clock::now() - t0).count());
        best_cluster = std::min(best_cluster, cluster_s);
    }
    const auto profile = divt::ModelProfile::llama_7b();
    const double mean_k = static_cast<double>(tokens) / static_cast<double>(corpus.size());
    const double mean_n = static_cast<double>(patches) / static_cast<double>(corpus.size());
    std::printf("images=%zu theta=%s threads=%zu\n", corpus.size(), format_double(o.theta).c_str(),
                divt::thread_count());
    std::printf("mean_patches=%.2f mean_tokens=%.2f reduction=%.2fx\n", mean_n, mean_k, mean_n / mean_k);
    std::printf("kv_cache_mb_llama_7b: patches=%.2f tokens=%.2f\n", mean_n * divt::kv_cache_megabytes(1, profile),
                mean_k * divt::kv_cache_megabytes(1, profile));
    std::printf("wall_clock_ms (best of %d): cluster=%.3f cluster+tokens=%.3f per_image=%.3f\n", o.repeat,
                best_cluster * 1e3, best_total * 1e3, best_total * 1e3 / static_cast<double>(corpus.size()));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"divt: similarity-clustered visual tokenizer"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    TokenizeOptions tok;
    auto* c_tok = app.add_subcommand("tokenize", "cluster patch embeddings and form one token per cluster");
    c_tok->add_option("inputs", tok.inputs, ".divt files or directories")->required();
    c_tok->add_option("--theta", tok.theta, "similarity threshold in (-1, 1)")->capture_default_str();
    c_tok->add_option("--degree-policy", tok.degree_policy, "static | recompute")->capture_default_str();
    c_tok->add_option("--params", tok.params_path, "parameter checkpoint (random init when omitted)");
    c_tok->add_option("--seed", tok.seed, "seed for random init")->capture_default_str();
    c_tok->add_option("--d-att", tok.d_att)->capture_default_str();
    c_tok->add_option("--d-hidden", tok.d_hidden)->capture_default_str();
    c_tok->add_option("--d-out", tok.d_out)->capture_default_str();
    c_tok->add_option("--scale", tok.scale, "scaled | unscaled attention logits")->capture_default_str();
    c_tok->add_flag("--attention", tok.attention, "also write <id>.attention.csv");
    c_tok->add_option("--out", tok.out, "output directory")->required();

    SweepOptions sw;
    auto* c_sw = app.add_subcommand("sweep", "token-count statistics across thresholds");
    c_sw->add_option("inputs", sw.inputs, ".divt files or directories")->required();
    c_sw->add_option("--thetas", sw.thetas, "comma-separated thresholds")->capture_default_str();
    c_sw->add_option("--degree-policy", sw.degree_policy)->capture_default_str();
    c_sw->add_option("--csv", sw.csv, "CSV output path")->required();
    c_sw->add_option("--json", sw.json_out, "JSON output path (default: CSV path with .json)");

    AnalyzeOptions an;
    auto* c_an = app.add_subcommand("analyze", "mean pairwise patch similarity per encoder layer");
    c_an->add_option("inputs", an.inputs, ".divl files or directories")->required();
    c_an->add_option("--csv", an.csv, "CSV output path")->required();

    GradcheckOptions gc;
    auto* c_gc = app.add_subcommand("gradcheck", "compare analytic gradients with central differences");
    c_gc->add_option("--n", gc.n, "patches")->capture_default_str();
    c_gc->add_option("--d", gc.d, "embedding width")->capture_default_str();
    c_gc->add_option("--theta", gc.theta)->capture_default_str();
    c_gc->add_option("--seed", gc.seed)->capture_default_str();
    c_gc->add_option("--eps", gc.eps, "finite-difference step")->capture_default_str();
    c_gc->add_option("--scale", gc.scale)->capture_default_str();

    RenderOptions rn;
    auto* c_rn = app.add_subcommand("render", "draw a cluster map as a PPM image");
    c_rn->add_option("input", rn.input, "cluster JSON written by tokenize")->required();
    c_rn->add_option("--ppm", rn.ppm, "output path")->required();
    c_rn->add_option("--scale", rn.scale, "pixels per patch side")->capture_default_str();

    SynthOptions sy;
    auto* c_sy = app.add_subcommand("synth", "write a synthetic clustered corpus");
    c_sy->add_option("--out", sy.out, "output directory")->required();
    c_sy->add_option("--count", sy.count)->capture_default_str();
    c_sy->add_option("--n-patches", sy.n_patches)->capture_default_str();
    c_sy->add_option("--dim", sy.dim)->capture_default_str();
    c_sy->add_option("--min-clusters", sy.min_clusters)->capture_default_str();
    c_sy->add_option("--max-clusters", sy.max_clusters)->capture_default_str();
    c_sy->add_option("--min-noise", sy.min_noise)->capture_default_str();
    c_sy->add_option("--max-noise", sy.max_noise)->capture_default_str();
    c_sy->add_option("--row-scale", sy.row_scale)->capture_default_str();
    c_sy->add_option("--dtype", sy.dtype, "f32 | f64")->capture_default_str();
    c_sy->add_option("--seed", sy.seed)->capture_default_str();

    TrainOptions tr;
    auto* c_tr = app.add_subcommand("train", "fit the token former to the surrogate objective");
    c_tr->add_option("inputs", tr.inputs, ".divt files or directories")->required();
    c_tr->add_option("--out", tr.out, "checkpoint path")->required();
    c_tr->add_option("--steps", tr.steps)->capture_default_str();
    c_tr->add_option("--lr", tr.lr)->capture_default_str();
    c_tr->add_option("--batch", tr.batch, "images per step, 0 = all")->capture_default_str();
    c_tr->add_option("--thetas", tr.thetas, "comma-separated thresholds")->capture_default_str();
    c_tr->add_flag("--randomize-theta", tr.randomize, "draw a threshold per image per step");
    c_tr->add_option("--target", tr.target, "cluster-mean | teacher")->capture_default_str();
    c_tr->add_option("--d-att", tr.d_att)->capture_default_str();
    c_tr->add_option("--d-hidden", tr.d_hidden)->capture_default_str();
    c_tr->add_option("--d-out", tr.d_out)->capture_default_str();
    c_tr->add_option("--scale", tr.scale)->capture_default_str();
    c_tr->add_option("--seed", tr.seed)->capture_default_str();

    BenchOptions be;
    auto* c_be = app.add_subcommand("bench", "time clustering and token formation");
    c_be->add_option("inputs", be.inputs, ".divt files or directories")->required();
    c_be->add_option("--theta", be.theta)->capture_default_str();
    c_be->add_option("--repeat", be.repeat)->capture_default_str();
    c_be->add_option("--seed", be.seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kParamError;
    }

    try {
        if (*c_tok) return run_tokenize(tok);
        if (*c_sw) return run_sweep(sw);
        if (*c_an) return run_analyze(an);
        if (*c_gc) return run_gradcheck(gc);
        if (*c_rn) return run_render(rn);
        if (*c_sy) return run_synth(sy);
        if (*c_tr) return run_train(tr);
        if (*c_be) return run_bench(be);
    } catch (const Failure& f) {
        std::fprintf(stderr, "divt: %s\n", f.message.c_str());
        return f.code;
    } catch (const divt::Error& e) {
        std::fprintf(stderr, "divt: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "divt: internal error: %s\n", e.what());
        return kCheckFailed;
    }
    return kParamError;
}
