#pragma once

#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "g4ds/pipeline/stylize.hpp"
#include "g4ds/train/adam.hpp"
#include "g4ds/train/losses.hpp"
#include "g4ds/train/model.hpp"

namespace g4ds::train {

/// Stage 2: with every stage-1 parameter frozen, trains the content/style
/// extractors and transform-predictor MLPs against the covariance-matching
/// and art losses, and the propagation network against the reconstruction
/// features of detached stylizations. One (style, camera, timestep) sample
/// per step. CSV columns: "step,loss,cov,content,style,pro".
inline void train_stage2(Model& m, const std::vector<Tensor>& style_images_hwc,
                         const io::RunConfig& cfg, std::ostream* log = nullptr,
                         std::ostream* progress = nullptr) {
    cfg.validate();
    if (m.trained_stage < 1)
        throw std::invalid_argument("train_stage2: needs a stage-1 checkpoint");
    if (style_images_hwc.size() < 2)
        throw std::invalid_argument("train_stage2: needs at least 2 style images");

    Rng rng(cfg.seed ^ 0x57A6E2ull);

    // Per-style constants under the frozen reversible network.
    std::vector<pipeline::StyleContext> styles;
    for (const auto& img : style_images_hwc) styles.push_back(pipeline::prepare_style(m, img));

    const Tensor mu_f = pipeline::gaussian_feature_mean(m);
    const Tensor& g_e = m.scene.gaussians.features.value;

    Adam opt;
    opt.add_group(m.stage2_parameters(), cfg.stage2.lr);
    opt.set_total_steps(cfg.stage2.iters);

    std::vector<int> train_cams;
    for (std::size_t i = 0; i < m.scene.cameras.size(); ++i)
        if (static_cast<int>(i) != m.scene.held_out_camera)
            train_cams.push_back(static_cast<int>(i));

    // Rendered views are frozen in this stage; cache them per (camera, t).
    std::map<int, std::pair<Tensor, Tensor>> view_cache; // -> (F map hwc, recon chw)

    if (log) *log << "step,loss,cov,content,style,pro\n";

    for (int step = 0; step < cfg.stage2.iters; ++step) {
        const std::size_t si = rng.uniform_index(styles.size());
        const int cam = train_cams[rng.uniform_index(train_cams.size())];
        const int tj = static_cast<int>(rng.uniform_index(m.scene.timestamps.size()));
        const pipeline::StyleContext& style = styles[si];

        const int key = cam * 1024 + tj;
        auto it = view_cache.find(key);
        if (it == view_cache.end()) {
            Tape t0(false);
            render::RenderResult r = render::render_scene(
                t0, m.scene.gaussians, m.scene.deformation, m.heads,
                m.scene.cameras[static_cast<std::size_t>(cam)],
                m.scene.timestamps[static_cast<std::size_t>(tj)]);
            Var recon = m.revnet.inverse_image(t0, t0.hwc_to_chw(r.feature));
            it = view_cache.emplace(key, std::make_pair(t0.value(r.feature), t0.value(recon)))
                     .first;
        }
        const Tensor& f_map = it->second.first;    // {H,W,32}
        const Tensor& recon = it->second.second;   // {3,H,W}

        opt.zero_grad();
        Tape t;
        // Transform prediction.
        Var f_c = m.phi_c.forward(t, t.constant(g_e));
        Var f_s = m.phi_s.forward(t, t.constant(style.rev_feature));
        Var t_c = m.mlp_c.forward(t, f_c);
        Var t_s = m.mlp_s.forward(t, f_s);
        Var combined = t.matmul(t_s, t_c);

        // Covariance-matching objective on centered extractor features.
        Var fc_centered = t.sub_rowvec(f_c, t.mean_rows(f_c));
        Var fs_centered = t.sub_rowvec(f_s, t.mean_rows(f_s));
        Var fcs = t.matmul_nt(fc_centered, combined);
        Var cov_loss = wct::covariance_loss(t, fcs, fs_centered);

        // Stylize the cached view with the predicted transform.
        const std::size_t H = f_map.dim(0), W = f_map.dim(1);
        Var f_rows = t.constant(f_map.reshaped({H * W, 32}));
        Var f_cs_rows = wct::apply_transform(t, f_rows, combined, t.constant(mu_f),
                                             t.constant(style.style_mean));
        Var trans_chw =
            m.revnet.inverse_image(t, t.hwc_to_chw(t.reshape(f_cs_rows, {H, W, 32})));

        Tape gt_tape(false);
        Var gt_chw_v = gt_tape.hwc_to_chw(gt_tape.constant(m.scene.gt(cam, tj)));
        ArtLoss art = loss_art(t, trans_chw, gt_tape.value(gt_chw_v), style.image_chw, m.encoder,
                               cfg.stage2.lambda_content, cfg.stage2.lambda_style);

        // Propagation on detached inputs: gradients reach only the guidance
        // network.
        Var detached_trans = t.constant(t.value(trans_chw));
        Var guidance = t.constant(nets::whiten_chw(recon));
        Var propagated =
            nets::Cspn::apply(t, detached_trans, m.cspn.kernels(t, guidance),
                              cfg.stage2.cspn_iterations);
        Var pro_loss = loss_pro(t, propagated, recon, m.encoder);

        Var total = t.add(t.add(cov_loss, art.total), pro_loss);
        const double loss_val = t.value(total).item();
        if (!std::isfinite(loss_val)) {
            std::ostringstream msg;
            msg << "train_stage2: non-finite loss at step " << step << " (style " << si
                << ", camera " << cam << ", t index " << tj << ")";
            throw std::runtime_error(msg.str());
        }
        t.backward(total);
        opt.step();

        if (log && cfg.stage2.log_interval > 0 &&
            (step % cfg.stage2.log_interval == 0 || step + 1 == cfg.stage2.iters)) {
            *log << step << "," << loss_val << "," << t.value(cov_loss).item() << ","
                 << t.value(art.content).item() << "," << t.value(art.style).item() << ","
                 << t.value(pro_loss).item() << "\n";
            if (progress)
                *progress << "stage2 step " << step << "/" << cfg.stage2.iters << " loss "
                          << loss_val << "\n";
        }
    }
    m.trained_stage = std::max(m.trained_stage, 2);
}

} // namespace g4ds::train
