#pragma once

#include <array>
#include <cmath>

#include "g4ds/nets/encoder.hpp"
#include "g4ds/nets/revnet.hpp"
#include "g4ds/render/render.hpp"

namespace g4ds::train {

inline double psnr_from_mse(double mse) { return -10.0 * std::log10(std::max(mse, 1e-12)); }

struct EmbedLoss {
    Var total;
    Var color_term;   // mean squared color error
    Var feature_term; // mean squared error of the decoded feature branch
    Var reconstruction; // {3,H,W} image decoded from F through the inverse net
};

/// Reconstruction loss of both branches: color head against ground truth
/// plus the feature map decoded back to an image through the reversible
/// network's inverse, against the same ground truth.
inline EmbedLoss loss_embed(Tape& t, const render::RenderResult& r, const Tensor& gt_hwc,
                            nets::RevNet& revnet, double lambda_color, double lambda_feature) {
    EmbedLoss out;
    Var gt = t.constant(gt_hwc);
    out.color_term = t.mse(r.color, gt);
    Var f_chw = t.hwc_to_chw(r.feature);
    out.reconstruction = revnet.inverse_image(t, f_chw);
    Var gt_chw = t.hwc_to_chw(gt);
    out.feature_term = t.mse(out.reconstruction, gt_chw);
    out.total = t.add(t.scale(out.color_term, lambda_color),
                      t.scale(out.feature_term, lambda_feature));
    return out;
}

/// Per-channel spatial mean and std (eps-regularized) of a {C,H,W} activation.
inline std::pair<Var, Var> channel_stats(Tape& t, Var x) {
    Var mu = t.channel_mean(x);
    Var centered = t.sub_cvec(x, mu);
    Var var = t.channel_mean(t.mul(centered, centered));
    return {mu, t.sqrt_shift(var, 1e-8)};
}

struct ArtLoss {
    Var total;
    Var content;
    Var style;
};

/// Content preservation from the deepest encoder stage plus mean/std style
/// statistics matched at all three stages.
inline ArtLoss loss_art(Tape& t, Var stylized_chw, const Tensor& gt_chw, const Tensor& style_chw,
                        nets::FrozenEncoder& enc, double lambda_content, double lambda_style) {
    auto stages = enc.stages(t, stylized_chw);
    auto gt_stages = enc.stages(t, t.constant(gt_chw));
    auto style_stages = enc.stages(t, t.constant(style_chw));

    ArtLoss out;
    out.content = t.mse(stages[2], gt_stages[2]);
    Var style_acc;
    for (int s = 0; s < 3; ++s) {
        auto [mu, sd] = channel_stats(t, stages[static_cast<std::size_t>(s)]);
        auto [mu_s, sd_s] = channel_stats(t, style_stages[static_cast<std::size_t>(s)]);
        Var term = t.add(t.mse(mu, mu_s), t.mse(sd, sd_s));
        style_acc = s == 0 ? term : t.add(style_acc, term);
    }
    out.style = style_acc;
    out.total = t.add(t.scale(out.content, lambda_content), t.scale(out.style, lambda_style));
    return out;
}

/// Propagation loss: deepest-stage encoder distance between the propagated
/// stylization and the (detached) reconstruction.
inline Var loss_pro(Tape& t, Var propagated_chw, const Tensor& reconstruction_chw,
                    nets::FrozenEncoder& enc) {
    auto stages = enc.stages(t, propagated_chw);
    auto recon_stages = enc.stages(t, t.constant(reconstruction_chw));
    return t.mse(stages[2], recon_stages[2]);
}

} // namespace g4ds::train
