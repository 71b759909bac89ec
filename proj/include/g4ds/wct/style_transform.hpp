#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "g4ds/core/tape.hpp"
#include "g4ds/core/tensor.hpp"
#include "g4ds/wct/eigh.hpp"

namespace g4ds::wct {

/// Linear style transformation state: whitening matrix, coloring matrix and
/// the two means. Application: f' = T_s T_c (f - content_mean) + style_mean.
struct StyleTransform {
    Tensor whitening;    // T_c, {n,n}
    Tensor coloring;     // T_s, {n,n}
    Tensor content_mean; // {n}
    Tensor style_mean;   // {n}

    std::size_t size() const { return content_mean.numel(); }

    /// T_s * T_c as a single matrix.
    Tensor combined() const {
        const std::size_t n = size();
        Tensor out({n, n});
        mm(coloring, false, whitening, false, out, false);
        return out;
    }
};

/// Column means of {N,n} samples.
inline Tensor sample_mean(const Tensor& samples) {
    const std::size_t N = samples.dim(0), n = samples.dim(1);
    Tensor mu({n});
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t c = 0; c < n; ++c) mu[c] += samples.at(i, c);
    for (std::size_t c = 0; c < n; ++c) mu[c] /= static_cast<double>(N);
    return mu;
}

/// Covariance (1/N) Xc^T Xc of {N,n} samples around the given mean.
inline Tensor covariance(const Tensor& samples, const Tensor& mean) {
    const std::size_t N = samples.dim(0), n = samples.dim(1);
    if (N < 2) throw std::invalid_argument("covariance: need at least 2 samples");
    Tensor cov({n, n});
    std::vector<double> row(n);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t c = 0; c < n; ++c) row[c] = samples.at(i, c) - mean[c];
        for (std::size_t a = 0; a < n; ++a) {
            const double ra = row[a];
            for (std::size_t b = a; b < n; ++b) cov.at(a, b) += ra * row[b];
        }
    }
    const double inv = 1.0 / static_cast<double>(N);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a; b < n; ++b) {
            cov.at(a, b) *= inv;
            cov.at(b, a) = cov.at(a, b);
        }
    return cov;
}

inline Tensor covariance(const Tensor& samples) { return covariance(samples, sample_mean(samples)); }

/// Closed-form transform matching content covariance to style covariance:
/// T_c = W_c S_c^{-1/2} W_c^T (whitening), T_s = W_s S_s^{1/2} W_s^T
/// (coloring). With full-rank inputs, T cov(content) T^T == cov(style).
inline StyleTransform closed_form_transform(const Tensor& content_samples, const Tensor& style_samples) {
    StyleTransform tr;
    tr.content_mean = sample_mean(content_samples);
    tr.style_mean = sample_mean(style_samples);
    tr.whitening = eigh(covariance(content_samples, tr.content_mean)).inv_sqrt();
    tr.coloring = eigh(covariance(style_samples, tr.style_mean)).sqrt();
    return tr;
}

/// Covariance-matching loss between centered sample sets: mean-normalized
/// Gram matrices, squared Frobenius distance over the feature dimension.
inline double covariance_gap(const Tensor& centered_a, const Tensor& centered_b) {
    const std::size_t n = centered_a.dim(1);
    Tensor ga({n, n}), gb({n, n});
    mm(centered_a, true, centered_a, false, ga, false);
    mm(centered_b, true, centered_b, false, gb, false);
    const double inva = 1.0 / static_cast<double>(centered_a.dim(0));
    const double invb = 1.0 / static_cast<double>(centered_b.dim(0));
    double s = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) {
        const double d = ga[i] * inva - gb[i] * invb;
        s += d * d;
    }
    return s / static_cast<double>(n);
}

/// Tape version of covariance_gap for training the transform predictors.
/// Inputs are centered {N,n} sample matrices.
inline Var covariance_loss(Tape& t, Var centered_a, Var centered_b) {
    const double na = static_cast<double>(t.value(centered_a).dim(0));
    const double nb = static_cast<double>(t.value(centered_b).dim(0));
    const double n = static_cast<double>(t.value(centered_a).dim(1));
    Var ga = t.scale(t.matmul_tn(centered_a, centered_a), 1.0 / na);
    Var gb = t.scale(t.matmul_tn(centered_b, centered_b), 1.0 / nb);
    Var d = t.sub(ga, gb);
    return t.scale(t.sum(t.mul(d, d)), 1.0 / n);
}

/// Applies the transform to a {H,W,n} feature map (or {N,n} sample matrix):
/// out = P (f - content_mean) + style_mean with P = coloring * whitening.
inline Tensor apply_transform(const Tensor& features, const StyleTransform& tr) {
    const std::size_t n = tr.size();
    const std::size_t N = features.numel() / n;
    const Tensor P = tr.combined();
    Tensor out(features.shape());
    std::vector<double> centered(n);
    for (std::size_t i = 0; i < N; ++i) {
        const double* f = features.data() + i * n;
        double* o = out.data() + i * n;
        for (std::size_t c = 0; c < n; ++c) centered[c] = f[c] - tr.content_mean[c];
        for (std::size_t r = 0; r < n; ++r) {
            const double* prow = P.data() + r * n;
            double acc = 0.0;
            for (std::size_t c = 0; c < n; ++c) acc += prow[c] * centered[c];
            o[r] = acc + tr.style_mean[r];
        }
    }
    return out;
}

/// Tape version: features {N,n} rows transformed by a predicted {n,n} matrix
/// P and the two mean vectors: rows' = (rows - mu_c) P^T + mu_s.
inline Var apply_transform(Tape& t, Var features, Var P, Var content_mean, Var style_mean) {
    Var centered = t.sub_rowvec(features, content_mean);
    return t.add_rowvec(t.matmul_nt(centered, P), style_mean);
}

/// Convex blend of transforms: combined matrices and style means are blended
/// component-wise; the content mean is shared. Blending commutes with
/// application because the map is affine in (P, style_mean).
inline StyleTransform interpolate_styles(const std::vector<std::pair<StyleTransform, double>>& entries) {
    if (entries.empty()) throw std::invalid_argument("interpolate_styles: empty list");
    double wsum = 0.0;
    for (const auto& [tr, w] : entries) {
        if (w < 0.0) throw std::invalid_argument("interpolate_styles: negative weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("interpolate_styles: weights must sum to 1");

    const std::size_t n = entries.front().first.size();
    StyleTransform out;
    out.whitening = Tensor({n, n});
    for (std::size_t i = 0; i < n; ++i) out.whitening.at(i, i) = 1.0;
    out.coloring = Tensor({n, n});
    out.style_mean = Tensor({n});
    out.content_mean = entries.front().first.content_mean;
    for (const auto& [tr, w] : entries) {
        const Tensor P = tr.combined();
        for (std::size_t i = 0; i < n * n; ++i) out.coloring[i] += w * P[i];
        for (std::size_t c = 0; c < n; ++c) out.style_mean[c] += w * tr.style_mean[c];
    }
    return out;
}

} // namespace g4ds::wct
