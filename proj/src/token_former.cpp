// Copyright 2026 The divt Authors
// SPDX-License-Identifier: Apache-2.0

#include "divt/token_former.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bytes.hpp"
#include "divt/errors.hpp"
#include "divt/fileio.hpp"
#include "divt/random.hpp"

namespace divt {

namespace {

void check_shape(const char* name, Index rows, Index cols, Index want_rows, Index want_cols) {
    if (rows != want_rows || cols != want_cols) {
        throw ParameterError(std::string(name) + " is " + std::to_string(rows) + "x" + std::to_string(cols) +
                             ", expected " + std::to_string(want_rows) + "x" + std::to_string(want_cols));
    }
}

void check_inputs(const PatchSet& ps, const Clustering& cl, const TokenFormerParams& params) {
    ps.validate();
    params.validate();
    const auto dims = params.dims();
    if (ps.dim() != dims.d) {
        throw ParameterError("patch width " + std::to_string(ps.dim()) + " does not match projector input width " +
                             std::to_string(dims.d));
    }
    if (ps.n_patches() > dims.n_max) {
        throw ParameterError(std::to_string(ps.n_patches()) + " patches exceed positional table capacity " +
                             std::to_string(dims.n_max));
    }
    cl.validate(ps.n_patches());
}

// Everything the backward pass needs from one cluster's forward pass.
struct ClusterPass {
    std::vector<Index> members;
    Vector query;     // d_att
    Matrix keys;      // M x d_att
    Matrix shifted;   // M x d, member rows of x + P
    Matrix values;    // M x d_att
    Vector weights;   // M, softmax
    Vector pooled;    // d_att
    Vector hidden;    // d_hidden, pre-activation
    Vector activated; // d_hidden
    Vector token;     // d_out
};

ClusterPass forward_cluster(const PatchSet& ps, const Clustering& cl, const TokenFormerParams& p,
                            const std::vector<Index>& members, Index k) {
    ClusterPass f;
    f.members = members;
    const Index m = static_cast<Index>(members.size());
    const Index d = ps.dim();

    Matrix x(m, d);
    f.shifted.resize(m, d);
    for (Index j = 0; j < m; ++j) {
        const Index i = members[static_cast<std::size_t>(j)];
        x.row(j) = ps.data.row(i);
        f.shifted.row(j) = ps.data.row(i) + p.pos_table.row(i);
    }

    const Index c = cl.centroids[static_cast<std::size_t>(k)];
    f.query = p.w_q * ps.data.row(c).transpose();
    f.keys = x * p.w_k.transpose();
    f.values = f.shifted * p.w_v.transpose();

    // Only member logits are materialised; the -inf entries never enter the max or the sum.
    Vector logits = p.logit_scale() * (f.keys * f.query);
    const double peak = logits.maxCoeff();
    f.weights = (logits.array() - peak).exp().matrix();
    f.weights /= f.weights.sum();

    f.pooled = f.values.transpose() * f.weights;
    f.hidden = p.w1 * f.pooled + p.b1;
    f.activated = f.hidden.unaryExpr([](double v) { return gelu(v); });
    f.token = p.w2 * f.activated + p.b2;
    return f;
}

std::vector<std::vector<Index>> members_by_cluster(const Clustering& cl) {
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(cl.k()));
    for (Index i = 0; i < cl.n_patches(); ++i) {
        members[static_cast<std::size_t>(cl.assignment[static_cast<std::size_t>(i)])].push_back(i);
    }
    return members;
}

// Visits tensors in checkpoint order. P is TokenFormerParams, const or not.
template <typename P, typename Fn>
void for_each_tensor(P& p, Fn&& fn) {
    fn(p.w_q.data(), p.w_q.size());
    fn(p.w_k.data(), p.w_k.size());
    fn(p.w_v.data(), p.w_v.size());
    fn(p.pos_table.data(), p.pos_table.size());
    fn(p.w1.data(), p.w1.size());
    fn(p.b1.data(), p.b1.size());
    fn(p.w2.data(), p.w2.size());
    fn(p.b2.data(), p.b2.size());
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

TokenFormerDims TokenFormerParams::dims() const {
    return {w_q.cols(), w_q.rows(), w1.rows(), w2.rows(), pos_table.rows()};
}

double TokenFormerParams::logit_scale() const {
    return scale_policy == ScalePolicy::kScaled ? 1.0 / std::sqrt(static_cast<double>(w_q.rows())) : 1.0;
}

Index TokenFormerParams::num_scalars() const {
    return w_q.size() + w_k.size() + w_v.size() + pos_table.size() + w1.size() + b1.size() + w2.size() +
           b2.size();
}

void TokenFormerParams::validate() const {
    const auto dm = dims();
    if (dm.d < 1 || dm.d_att < 1 || dm.d_hidden < 1 || dm.d_out < 1 || dm.n_max < 1) {
        throw ParameterError("projector dimensions must be positive");
    }
    check_shape("w_k", w_k.rows(), w_k.cols(), dm.d_att, dm.d);
    check_shape("w_v", w_v.rows(), w_v.cols(), dm.d_att, dm.d);
    check_shape("pos_table", pos_table.rows(), pos_table.cols(), dm.n_max, dm.d);
    check_shape("w1", w1.rows(), w1.cols(), dm.d_hidden, dm.d_att);
    check_shape("b1", b1.rows(), 1, dm.d_hidden, 1);
    check_shape("w2", w2.rows(), w2.cols(), dm.d_out, dm.d_hidden);
    check_shape("b2", b2.rows(), 1, dm.d_out, 1);
    if (scale_policy != ScalePolicy::kScaled && scale_policy != ScalePolicy::kUnscaled) {
        throw ParameterError("unknown scale policy");
    }
    bool finite = true;
    for_each_tensor(*this, [&](const double* data, Index n) {
        for (Index i = 0; i < n; ++i) finite = finite && std::isfinite(data[i]);
    });
    if (!finite) {
        throw ParameterError("projector parameters contain non-finite values");
    }
}

TokenFormerParams TokenFormerParams::zeros_like() const {
    TokenFormerParams z = *this;
    for_each_tensor(z, [](double* data, Index n) { std::fill(data, data + n, 0.0); });
    return z;
}

std::vector<double> TokenFormerParams::flatten() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(num_scalars()));
    for_each_tensor(*this, [&](const double* data, Index n) { out.insert(out.end(), data, data + n); });
    return out;
}

void TokenFormerParams::assign_flat(std::span<const double> values) {
    if (static_cast<Index>(values.size()) != num_scalars()) {
        throw ParameterError("flat parameter vector has " + std::to_string(values.size()) + " entries, expected " +
                             std::to_string(num_scalars()));
    }
    std::size_t pos = 0;
    for_each_tensor(*this, [&](double* data, Index n) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), n, data);
        pos += static_cast<std::size_t>(n);
    });
}

TokenFormerParams init_params(const TokenFormerDims& dims, std::uint64_t seed, double weight_std,
                              ScalePolicy scale_policy) {
    if (dims.d < 1 || dims.d_att < 1 || dims.d_hidden < 1 || dims.d_out < 1 || dims.n_max < 1) {
        throw ParameterError("projector dimensions must be positive");
    }
    if (!(weight_std >= 0.0) || !std::isfinite(weight_std)) {
        throw ParameterError("weight std must be finite and >= 0");
    }
    TokenFormerParams p;
    p.scale_policy = scale_policy;
    p.w_q.resize(dims.d_att, dims.d);
    p.w_k.resize(dims.d_att, dims.d);
    p.w_v.resize(dims.d_att, dims.d);
    p.pos_table.resize(dims.n_max, dims.d);
    p.w1.resize(dims.d_hidden, dims.d_att);
    p.b1 = Vector::Zero(dims.d_hidden);
    p.w2.resize(dims.d_out, dims.d_hidden);
    p.b2 = Vector::Zero(dims.d_out);

    Rng rng(seed);
    auto fill = [&](Matrix& m) {
        for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, weight_std);
    };
    fill(p.w_q);
    fill(p.w_k);
    fill(p.w_v);
    fill(p.pos_table);
    fill(p.w1);
    fill(p.w2);
    return p;
}

AttentionMask AttentionMask::from_clustering(const Clustering& cl) {
    AttentionMask m;
    m.mask.setConstant(cl.k(), cl.n_patches(), false);
    for (Index i = 0; i < cl.n_patches(); ++i) m.mask(cl.assignment[static_cast<std::size_t>(i)], i) = true;
    return m;
}

TokenSequence form_tokens(const PatchSet& ps, const Clustering& cl, const TokenFormerParams& params) {
    check_inputs(ps, cl, params);
    const auto members = members_by_cluster(cl);
    TokenSequence out;
    out.centroids = cl.centroids;
    out.tokens.resize(cl.k(), params.w2.rows());
    for (Index k = 0; k < cl.k(); ++k) {
        out.tokens.row(k) = forward_cluster(ps, cl, params, members[static_cast<std::size_t>(k)], k).token;
    }
    return out;
}

Matrix attention_weights(const PatchSet& ps, const Clustering& cl, const TokenFormerParams& params) {
    check_inputs(ps, cl, params);
    const auto members = members_by_cluster(cl);
    Matrix w = Matrix::Zero(cl.k(), ps.n_patches());
    for (Index k = 0; k < cl.k(); ++k) {
        const auto f = forward_cluster(ps, cl, params, members[static_cast<std::size_t>(k)], k);
        for (std::size_t j = 0; j < f.members.size(); ++j) w(k, f.members[j]) = f.weights(static_cast<Index>(j));
    }
    return w;
}

TokenFormerGrads backward(const PatchSet& ps, const Clustering& cl, const TokenFormerParams& params,
                          const Matrix& upstream) {
    check_inputs(ps, cl, params);
    check_shape("upstream gradient", upstream.rows(), upstream.cols(), cl.k(), params.w2.rows());
    const auto members = members_by_cluster(cl);
    const double scale = params.logit_scale();

    TokenFormerGrads g{params.zeros_like(), Matrix::Zero(ps.n_patches(), ps.dim())};
    auto& gp = g.params;

    for (Index k = 0; k < cl.k(); ++k) {
        const auto f = forward_cluster(ps, cl, params, members[static_cast<std::size_t>(k)], k);
        const Vector d_token = upstream.row(k).transpose();

        // MLP
        gp.w2.noalias() += d_token * f.activated.transpose();
        gp.b2 += d_token;
        const Vector d_activated = params.w2.transpose() * d_token;
        const Vector d_hidden = d_activated.cwiseProduct(f.hidden.unaryExpr([](double v) { return gelu_grad(v); }));
        gp.w1.noalias() += d_hidden * f.pooled.transpose();
        gp.b1 += d_hidden;
        const Vector d_pooled = params.w1.transpose() * d_hidden;

        // pooled = sum_j w_j v_j
        const Vector d_weights = f.values * d_pooled;                       // M
        const Matrix d_values = f.weights * d_pooled.transpose();           // M x d_att
        const double mean_dw = f.weights.dot(d_weights);
        const Vector d_logits = f.weights.cwiseProduct((d_weights.array() - mean_dw).matrix());

        // values = (x + P) W_v^T
        gp.w_v.noalias() += d_values.transpose() * f.shifted;
        const Matrix d_shifted = d_values * params.w_v;                     // M x d

        // logits = scale * keys q
        const Vector d_query = scale * (f.keys.transpose() * d_logits);     // d_att
        const Matrix d_keys = scale * d_logits * f.query.transpose();       // M x d_att

        Matrix x(static_cast<Index>(f.members.size()), ps.dim());
        for (std::size_t j = 0; j < f.members.size(); ++j) x.row(static_cast<Index>(j)) = ps.data.row(f.members[j]);
        gp.w_k.noalias() += d_keys.transpose() * x;
        const Matrix d_x_keys = d_keys * params.w_k;                        // M x d

        for (std::size_t j = 0; j < f.members.size(); ++j) {
            const Index i = f.members[j];
            const auto row = static_cast<Index>(j);
            gp.pos_table.row(i) += d_shifted.row(row);
            g.inputs.row(i) += d_shifted.row(row) + d_x_keys.row(row);
        }

        const Index c = cl.centroids[static_cast<std::size_t>(k)];
        gp.w_q.noalias() += d_query * ps.data.row(c);
        g.inputs.row(c) += (params.w_q.transpose() * d_query).transpose();
    }
    return g;
}

std::vector<std::byte> encode_params(const TokenFormerParams& params) {
    params.validate();
    const auto dm = params.dims();
    detail::ByteWriter out;
    out.magic("DIVP");
    out.u32(kFormatVersion);
    out.u32(static_cast<std::uint32_t>(params.scale_policy));
    out.u32(static_cast<std::uint32_t>(dm.d));
    out.u32(static_cast<std::uint32_t>(dm.d_att));
    out.u32(static_cast<std::uint32_t>(dm.d_hidden));
    out.u32(static_cast<std::uint32_t>(dm.d_out));
    out.u32(static_cast<std::uint32_t>(dm.n_max));
    for (double v : params.flatten()) out.f64(v);
    return out.take();
}

TokenFormerParams decode_params(std::span<const std::byte> bytes) {
    detail::ByteReader in(bytes);
    if (!in.magic_is("DIVP")) {
        throw FormatError(FormatError::Kind::kBadMagic, "bad magic, expected \"DIVP\"");
    }
    const auto version = in.u32("version");
    if (version != kFormatVersion) {
        throw FormatError(FormatError::Kind::kBadVersion, "unsupported version " + std::to_string(version));
    }
    const auto policy = in.u32("scale_policy");
    if (policy > 1) {
        throw FormatError(FormatError::Kind::kBadHeader, "unknown scale policy " + std::to_string(policy));
    }
    TokenFormerDims dm;
    dm.d = in.u32("d");
    dm.d_att = in.u32("d_att");
    dm.d_hidden = in.u32("d_hidden");
    dm.d_out = in.u32("d_out");
    dm.n_max = in.u32("n_max");
    if (dm.d < 1 || dm.d_att < 1 || dm.d_hidden < 1 || dm.d_out < 1 || dm.n_max < 1) {
        throw FormatError(FormatError::Kind::kBadHeader, "checkpoint has a zero dimension");
    }
    auto p = init_params(dm, 0, 0.0, static_cast<ScalePolicy>(policy));
    in.need(static_cast<std::size_t>(p.num_scalars()) * 8, "parameters");
    std::vector<double> flat(static_cast<std::size_t>(p.num_scalars()));
    for (double& v : flat) v = in.f64("parameters");
    in.expect_end();
    p.assign_flat(flat);
    p.validate();
    return p;
}

void save_params(const TokenFormerParams& params, const std::filesystem::path& path) {
    write_file_atomic(path, encode_params(params));
}

TokenFormerParams load_params(const std::filesystem::path& path) {
    try {
        return decode_params(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path.string() + ": " + e.what());
    }
}

}  // namespace divt
