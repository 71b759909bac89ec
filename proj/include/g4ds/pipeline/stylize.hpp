#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "g4ds/nets/whiten.hpp"
#include "g4ds/train/model.hpp"
#include "g4ds/wct/style_transform.hpp"

namespace g4ds::pipeline {

inline constexpr int kStyleResolution = 256;

/// Center-crop to square then bilinear-resize an {H,W,3} image.
inline Tensor resize_square_hwc(const Tensor& img, int size) {
    const std::size_t h = img.dim(0), w = img.dim(1);
    const std::size_t side = std::min(h, w);
    const std::size_t y_off = (h - side) / 2, x_off = (w - side) / 2;
    Tensor out({static_cast<std::size_t>(size), static_cast<std::size_t>(size), 3});
    const double scale = static_cast<double>(side) / size;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double sy = (y + 0.5) * scale - 0.5;
            const double sx = (x + 0.5) * scale - 0.5;
            const double fy = sy - std::floor(sy), fx = sx - std::floor(sx);
            std::size_t y0 = static_cast<std::size_t>(std::max(0.0, std::floor(sy)));
            std::size_t x0 = static_cast<std::size_t>(std::max(0.0, std::floor(sx)));
            y0 = std::min(y0, side - 1);
            x0 = std::min(x0, side - 1);
            const std::size_t y1 = std::min(y0 + 1, side - 1);
            const std::size_t x1 = std::min(x0 + 1, side - 1);
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = (1 - fy) * ((1 - fx) * img.at(y_off + y0, x_off + x0, c) +
                                             fx * img.at(y_off + y0, x_off + x1, c)) +
                                 fy * ((1 - fx) * img.at(y_off + y1, x_off + x0, c) +
                                       fx * img.at(y_off + y1, x_off + x1, c));
                out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = v;
            }
        }
    return out;
}

/// Everything derived from one style image under a frozen model: the
/// 32-channel encoding, its per-channel mean (the coloring-side mean), and
/// the resized RGB image for the art loss.
struct StyleContext {
    Tensor image_chw;   // {3,256,256}
    Tensor rev_feature; // {32,256,256}
    Tensor style_mean;  // {32}
};

inline StyleContext prepare_style(train::Model& m, const Tensor& style_hwc) {
    StyleContext ctx;
    const Tensor resized = resize_square_hwc(style_hwc, kStyleResolution);
    Tape t(false);
    Var chw = t.hwc_to_chw(t.constant(resized));
    ctx.image_chw = t.value(chw);
    Var feat = m.revnet.forward_image(t, chw);
    ctx.rev_feature = t.value(feat);
    ctx.style_mean = t.value(t.channel_mean(feat));
    return ctx;
}

/// Mean embedded feature over all Gaussians (the whitening-side mean).
inline Tensor gaussian_feature_mean(train::Model& m) {
    return wct::sample_mean(m.scene.gaussians.features.value);
}

/// Predicts the full style transformation for a prepared style using the
/// trained extractors and predictor MLPs.
inline wct::StyleTransform predict_style_transform(train::Model& m, const StyleContext& style) {
    Tape t(false);
    wct::StyleTransform tr;
    Var f_c = m.phi_c.forward(t, t.constant(m.scene.gaussians.features.value));
    tr.whitening = t.value(m.mlp_c.forward(t, f_c));
    Var f_s = m.phi_s.forward(t, t.constant(style.rev_feature));
    tr.coloring = t.value(m.mlp_s.forward(t, f_s));
    tr.content_mean = gaussian_feature_mean(m);
    tr.style_mean = style.style_mean;
    return tr;
}

/// Closed-form per-frame 2D transform in reversible-feature space: the
/// baseline that uses this frame's pixel statistics instead of the shared
/// Gaussian statistics.
inline wct::StyleTransform per_frame_transform(const Tensor& feature_map_hwc,
                                               const StyleContext& style) {
    const std::size_t n = feature_map_hwc.numel() / 32;
    Tensor frame_rows = feature_map_hwc.reshaped({n, 32});
    const std::size_t m = style.rev_feature.dim(1) * style.rev_feature.dim(2);
    Tensor style_rows({m, 32});
    for (std::size_t c = 0; c < 32; ++c)
        for (std::size_t i = 0; i < m; ++i) style_rows.at(i, c) = style.rev_feature[c * m + i];
    return wct::closed_form_transform(frame_rows, style_rows);
}

struct StylizedView {
    Tensor feature_map;     // {H,W,32} rendered F
    Tensor reconstruction;  // {3,H,W} plain reconstruction from F
    Tensor pre_propagation; // {3,H,W} stylized, before guided filtering
    Tensor image;           // {3,H,W} final output (propagated unless disabled)
};

/// Renders one view and applies the linear style transformation in feature
/// space, decoding back to RGB through the inverse network; optionally runs
/// the guided propagation pass.
inline StylizedView stylize_view(train::Model& m, const wct::StyleTransform& tr, int camera,
                                 double time, bool propagate = true, int cspn_iterations = 3) {
    Tape t(false);
    render::RenderResult r = render::render_scene(
        t, m.scene.gaussians, m.scene.deformation, m.heads,
        m.scene.cameras[static_cast<std::size_t>(camera)], time);
    StylizedView out;
    out.feature_map = t.value(r.feature);
    Var recon = m.revnet.inverse_image(t, t.hwc_to_chw(r.feature));
    out.reconstruction = t.value(recon);

    const Tensor f_cs = wct::apply_transform(out.feature_map, tr);
    Var trans = m.revnet.inverse_image(t, t.hwc_to_chw(t.constant(f_cs)));
    out.pre_propagation = t.value(trans);
    if (propagate) {
        Var guidance = t.constant(nets::whiten_chw(out.reconstruction));
        Var pro = m.cspn.propagate(t, trans, guidance, cspn_iterations);
        out.image = t.value(pro);
    } else {
        out.image = out.pre_propagation;
    }
    return out;
}

/// Per-frame baseline counterpart of stylize_view (never propagated).
inline StylizedView stylize_view_baseline(train::Model& m, const StyleContext& style, int camera,
                                          double time) {
    Tape t(false);
    render::RenderResult r = render::render_scene(
        t, m.scene.gaussians, m.scene.deformation, m.heads,
        m.scene.cameras[static_cast<std::size_t>(camera)], time);
    StylizedView out;
    out.feature_map = t.value(r.feature);
    Var recon = m.revnet.inverse_image(t, t.hwc_to_chw(r.feature));
    out.reconstruction = t.value(recon);
    const wct::StyleTransform tr = per_frame_transform(out.feature_map, style);
    const Tensor f_cs = wct::apply_transform(out.feature_map, tr);
    Var trans = m.revnet.inverse_image(t, t.hwc_to_chw(t.constant(f_cs)));
    out.pre_propagation = t.value(trans);
    out.image = out.pre_propagation;
    return out;
}

/// Clamp an unbounded decoded image into display range.
inline Tensor clamp01(const Tensor& img) {
    Tensor out = img;
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = out[i] < 0.0 ? 0.0 : (out[i] > 1.0 ? 1.0 : out[i]);
    return out;
}

/// {C,H,W} -> {H,W,C} on plain tensors.
inline Tensor chw_to_hwc(const Tensor& x) {
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    Tensor out({H, W, C});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t xx = 0; xx < W; ++xx) out.at(y, xx, c) = x.at(c, y, xx);
    return out;
}

} // namespace g4ds::pipeline
