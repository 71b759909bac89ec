#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "g4ds/nets/conv_net.hpp"
#include "g4ds/nets/mlp.hpp"

namespace g4ds::nets {

/// Content-feature extractor over per-Gaussian embeddings: a residual
/// per-row MLP on {N,32}, identity at initialization.
class ContentExtractor {
public:
    ContentExtractor() = default;
    ContentExtractor(const std::string& name, Rng& rng)
        : mlp_(name, {32, 64, 32}, rng, /*zero_last=*/true, /*residual=*/true) {}

    Var forward(Tape& t, Var gaussian_features) { return mlp_.forward(t, gaussian_features); }

    std::vector<Parameter*> parameters() { return mlp_.parameters(); }

private:
    Mlp mlp_;
};

/// Style-feature extractor: three convolutions (stride 2, 2, 1) over the
/// 32-channel encoding of a style image; the spatial grid is flattened to
/// {H'*W', 32} sample rows.
class StyleExtractor {
public:
    static constexpr std::size_t kMinInput = 64;

    StyleExtractor() = default;
    StyleExtractor(const std::string& name, Rng& rng)
        : net_(name, {{32, 32, 3, 2, 1}, {32, 32, 3, 2, 1}, {32, 32, 3, 1, 1}}, rng) {}

    /// style_feature {32,H,W} -> {H'*W', 32}.
    Var forward(Tape& t, Var style_feature) {
        const Tensor& in = t.value(style_feature);
        if (in.dim(1) < kMinInput || in.dim(2) < kMinInput)
            throw std::invalid_argument("style extractor: input below 64x64");
        Var h = net_.forward(t, style_feature);
        const Tensor& out = t.value(h);
        const std::size_t n = out.dim(1) * out.dim(2);
        return t.reshape(t.chw_to_hwc(h), {n, out.dim(0)});
    }

    std::vector<Parameter*> parameters() { return net_.parameters(); }

private:
    ConvNet net_;
};

/// Transform predictors: each maps the flattened 32x32 second-moment matrix
/// of a sample set (a 1024-vector) through a residual MLP to a 32x32 matrix,
/// starting at the identity transform.
class TransformPredictor {
public:
    TransformPredictor() = default;
    TransformPredictor(const std::string& name, Rng& rng)
        : mlp_(name, {1024, 512, 1024}, rng, /*zero_last=*/true) {}

    /// samples {N,32} -> predicted {32,32} transform (identity + correction).
    Var forward(Tape& t, Var samples) {
        Var mu = t.mean_rows(samples);
        Var centered = t.sub_rowvec(samples, mu);
        const double invn = 1.0 / static_cast<double>(t.value(samples).dim(0));
        Var cov = t.scale(t.matmul_tn(centered, centered), invn);
        Var flat = t.reshape(cov, {1, 1024});
        Var delta = t.reshape(mlp_.forward(t, flat), {32, 32});
        Tensor eye({32, 32});
        for (std::size_t i = 0; i < 32; ++i) eye.at(i, i) = 1.0;
        return t.add(delta, t.constant(std::move(eye)));
    }

    /// Variant taking a precomputed covariance matrix {32,32}.
    Var forward_cov(Tape& t, Var cov) {
        Var flat = t.reshape(cov, {1, 1024});
        Var delta = t.reshape(mlp_.forward(t, flat), {32, 32});
        Tensor eye({32, 32});
        for (std::size_t i = 0; i < 32; ++i) eye.at(i, i) = 1.0;
        return t.add(delta, t.constant(std::move(eye)));
    }

    std::vector<Parameter*> parameters() { return mlp_.parameters(); }

private:
    Mlp mlp_;
};

} // namespace g4ds::nets
