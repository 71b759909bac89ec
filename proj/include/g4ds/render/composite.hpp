#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include "g4ds/render/project.hpp"

namespace g4ds::render {

inline constexpr int kTileSize = 16;

enum class RasterMode { Naive, Tiled };

namespace detail {

/// Per-pixel blend trace kept for the backward pass: entry i of pixel p is
/// (splat index, alpha, transmittance before the splat).
struct BlendRecord {
    std::vector<int> count;      // per pixel
    std::vector<int> splat;      // flattened entries
    std::vector<double> alpha;
    std::vector<double> trans;
};

struct SplatInverse {
    std::vector<double> ia, ib, ic; // covariance inverses per splat
};

inline SplatInverse invert_covariances(const Tensor& packed, const SplatBounds& bounds) {
    const std::size_t n = packed.dim(0);
    SplatInverse inv;
    inv.ia.assign(n, 0.0);
    inv.ib.assign(n, 0.0);
    inv.ic.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!bounds.valid[i]) continue;
        const double a = packed.at(i, 2), b = packed.at(i, 3), c = packed.at(i, 4);
        const double det = a * c - b * b;
        if (!(det > 0.0) || !std::isfinite(det))
            throw std::runtime_error("composite: covariance not positive definite");
        const double idet = 1.0 / det;
        inv.ia[i] = c * idet;
        inv.ib[i] = -b * idet;
        inv.ic[i] = a * idet;
    }
    return inv;
}

} // namespace detail

/// Front-to-back alpha compositing of projected splats into a {H,W,C}
/// feature map. Splats blend in canonical order (ascending depth, ties by
/// index); blending stops once transmittance drops below 1e-4. The tiled and
/// naive paths evaluate identical per-pixel splat sequences with identical
/// arithmetic, so their outputs agree bit for bit. `alpha_out`, when given,
/// receives the {H,W} accumulated opacity.
inline Var composite(Tape& t, Var packed, Var opacities, Var features,
                     std::shared_ptr<SplatBounds> bounds, int width, int height,
                     RasterMode mode = RasterMode::Tiled, Tensor* alpha_out = nullptr) {
    const Tensor& pk = t.value(packed);
    const Tensor& op = t.value(opacities);
    const Tensor& ft = t.value(features);
    const std::size_t channels = ft.dim(1);
    const std::size_t n_px = static_cast<std::size_t>(width) * height;

    const detail::SplatInverse inv = detail::invert_covariances(pk, *bounds);

    auto record = std::make_shared<detail::BlendRecord>();
    const bool keep_record = t.grad_enabled();
    if (keep_record) record->count.assign(n_px, 0);

    Tensor out({static_cast<std::size_t>(height), static_cast<std::size_t>(width), channels});
    if (alpha_out) *alpha_out = Tensor({static_cast<std::size_t>(height), static_cast<std::size_t>(width)});

    auto blend_pixel = [&](int x, int y, const std::vector<int>& candidates) {
        const double px = x + 0.5, py = y + 0.5;
        double trans = 1.0;
        double* orow = out.data() + (static_cast<std::size_t>(y) * width + x) * channels;
        for (const int idx : candidates) {
            const std::size_t i = static_cast<std::size_t>(idx);
            if (x < bounds->x0[i] || x >= bounds->x1[i] || y < bounds->y0[i] || y >= bounds->y1[i])
                continue;
            const double dx = px - pk.at(i, 0);
            const double dy = py - pk.at(i, 1);
            const double m = inv.ia[i] * dx * dx + 2.0 * inv.ib[i] * dx * dy + inv.ic[i] * dy * dy;
            double alpha = op.at(i, 0) * std::exp(-0.5 * m);
            if (alpha > kAlphaClamp) alpha = kAlphaClamp;
            if (alpha < kAlphaCutoff) continue;
            const double w = alpha * trans;
            const double* frow = ft.data() + i * channels;
            for (std::size_t ch = 0; ch < channels; ++ch) orow[ch] += frow[ch] * w;
            if (keep_record) {
                record->count[static_cast<std::size_t>(y) * width + x]++;
                record->splat.push_back(idx);
                record->alpha.push_back(alpha);
                record->trans.push_back(trans);
            }
            trans *= 1.0 - alpha;
            if (trans < kTransmittanceFloor) break;
        }
        if (alpha_out) alpha_out->at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 1.0 - trans;
    };

    if (mode == RasterMode::Naive) {
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) blend_pixel(x, y, bounds->order);
    } else {
        const int tiles_x = (width + kTileSize - 1) / kTileSize;
        const int tiles_y = (height + kTileSize - 1) / kTileSize;
        std::vector<std::vector<int>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
        for (const int idx : bounds->order) {
            const std::size_t i = static_cast<std::size_t>(idx);
            const int tx0 = bounds->x0[i] / kTileSize;
            const int ty0 = bounds->y0[i] / kTileSize;
            const int tx1 = (bounds->x1[i] - 1) / kTileSize;
            const int ty1 = (bounds->y1[i] - 1) / kTileSize;
            if (bounds->x1[i] <= bounds->x0[i] || bounds->y1[i] <= bounds->y0[i]) continue;
            for (int ty = ty0; ty <= ty1; ++ty)
                for (int tx = tx0; tx <= tx1; ++tx)
                    bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(idx);
        }
        for (int ty = 0; ty < tiles_y; ++ty)
            for (int tx = 0; tx < tiles_x; ++tx) {
                const auto& bin = bins[static_cast<std::size_t>(ty) * tiles_x + tx];
                const int yend = std::min(height, (ty + 1) * kTileSize);
                const int xend = std::min(width, (tx + 1) * kTileSize);
                for (int y = ty * kTileSize; y < yend; ++y)
                    for (int x = tx * kTileSize; x < xend; ++x) blend_pixel(x, y, bin);
            }
    }

    const int w = width, h = height;
    return t.custom(
        std::move(out), {packed.id, opacities.id, features.id},
        [record, bounds, w, h, channels](Tape& tp, int id) {
            const auto& node = tp.node(id);
            const Tensor& g = node.grad;
            const Tensor& pk = tp.node(node.parents[0]).value;
            const Tensor& op = tp.node(node.parents[1]).value;
            const Tensor& ft = tp.node(node.parents[2]).value;
            Tensor& gpk = tp.grad_mut(node.parents[0]);
            Tensor& gop = tp.grad_mut(node.parents[1]);
            Tensor& gft = tp.grad_mut(node.parents[2]);

            const detail::SplatInverse inv = detail::invert_covariances(pk, *bounds);
            // Entry offsets per pixel.
            std::vector<std::size_t> offset(record->count.size() + 1, 0);
            for (std::size_t p = 0; p < record->count.size(); ++p)
                offset[p + 1] = offset[p] + static_cast<std::size_t>(record->count[p]);

            std::vector<double> acc(channels);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const std::size_t p = static_cast<std::size_t>(y) * w + x;
                    const std::size_t e0 = offset[p], e1 = offset[p + 1];
                    if (e0 == e1) continue;
                    const double* gE = g.data() + p * channels;
                    std::fill(acc.begin(), acc.end(), 0.0);
                    const double px = x + 0.5, py = y + 0.5;
                    for (std::size_t e = e1; e-- > e0;) {
                        const std::size_t i = static_cast<std::size_t>(record->splat[e]);
                        const double alpha = record->alpha[e];
                        const double trans = record->trans[e];
                        const double* frow = ft.data() + i * channels;
                        double* gfrow = gft.data() + i * channels;
                        double dot_f = 0.0, dot_acc = 0.0;
                        const double w_blend = alpha * trans;
                        for (std::size_t ch = 0; ch < channels; ++ch) {
                            gfrow[ch] += gE[ch] * w_blend;
                            dot_f += gE[ch] * frow[ch];
                            dot_acc += gE[ch] * acc[ch];
                        }
                        const double dalpha = dot_f * trans - dot_acc / (1.0 - alpha);
                        for (std::size_t ch = 0; ch < channels; ++ch)
                            acc[ch] += frow[ch] * w_blend;
                        if (alpha >= kAlphaClamp) continue; // clamped: flat response
                        const double sigma = op.at(i, 0);
                        const double expo = alpha / sigma;
                        gop.at(i, 0) += dalpha * expo;
                        const double dm = dalpha * (-0.5 * alpha);
                        const double dx = px - pk.at(i, 0);
                        const double dy = py - pk.at(i, 1);
                        const double wx = inv.ia[i] * dx + inv.ib[i] * dy;
                        const double wy = inv.ib[i] * dx + inv.ic[i] * dy;
                        // d m / d mean = -2 (Sigma^-1 d); d m / d Sigma = -(w w^T)
                        gpk.at(i, 0) += dm * (-2.0 * wx);
                        gpk.at(i, 1) += dm * (-2.0 * wy);
                        gpk.at(i, 2) += dm * (-wx * wx);
                        gpk.at(i, 3) += dm * (-2.0 * wx * wy);
                        gpk.at(i, 4) += dm * (-wy * wy);
                    }
                }
        });
}

} // namespace g4ds::render
