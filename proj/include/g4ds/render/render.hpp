#pragma once

#include <string>

#include "g4ds/nets/mlp.hpp"
#include "g4ds/render/composite.hpp"
#include "g4ds/render/project.hpp"
#include "g4ds/scene/deformation.hpp"

namespace g4ds::render {

/// Per-pixel decoding heads over the rendered embedding: psi_c (32->64->3,
/// sigmoid output, zero biases so an empty embedding decodes to mid-gray) and
/// psi_f (32->64->32 residual, final layer zero so F = E at start).
struct RenderHeads {
    nets::Mlp psi_c;
    nets::Mlp psi_f;

    RenderHeads() = default;
    explicit RenderHeads(Rng& rng)
        : psi_c("heads.psi_c", {32, 64, 3}, rng, /*zero_last=*/false),
          psi_f("heads.psi_f", {32, 64, 32}, rng, /*zero_last=*/true, /*residual=*/true) {}

    std::vector<Parameter*> parameters() {
        auto ps = psi_c.parameters();
        auto pf = psi_f.parameters();
        ps.insert(ps.end(), pf.begin(), pf.end());
        return ps;
    }
};

struct RenderResult {
    Var embedding; // {H,W,32}
    Var color;     // {H,W,3}, sigmoid-squashed
    Var feature;   // {H,W,32}
    Tensor alpha;  // {H,W} accumulated opacity (not differentiated)
};

/// Decode color and feature maps from a rendered embedding.
inline void decode_heads(Tape& t, RenderHeads& heads, Var embedding, RenderResult& out) {
    const Tensor& e = t.value(embedding);
    const std::size_t H = e.dim(0), W = e.dim(1), C = e.dim(2);
    Var rows = t.reshape(embedding, {H * W, C});
    out.color = t.reshape(t.sigmoid(heads.psi_c.forward(t, rows)), {H, W, 3});
    out.feature = t.reshape(heads.psi_f.forward(t, rows), {H, W, C});
    out.embedding = embedding;
}

/// Full differentiable pipeline for one view at time `time`:
/// deform -> project -> depth-sorted alpha compositing -> heads.
inline RenderResult render_scene(Tape& t, scene::GaussianCloud& gaussians,
                                 scene::DeformationField& field, RenderHeads& heads,
                                 const scene::Camera& cam, double time,
                                 RasterMode mode = RasterMode::Tiled, bool apply_field = true) {
    scene::DeformedVars d = scene::deform(t, gaussians, field, time, apply_field);
    std::shared_ptr<SplatBounds> bounds;
    Var packed = project_gaussians(t, d.centers, d.log_scales, d.rotations, cam, bounds);
    RenderResult result;
    Var embedding = composite(t, packed, d.opacities, d.features, bounds, cam.width, cam.height,
                              mode, &result.alpha);
    decode_heads(t, heads, embedding, result);
    return result;
}

} // namespace g4ds::render
