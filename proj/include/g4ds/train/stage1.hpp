#pragma once

#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "g4ds/io/run_config.hpp"
#include "g4ds/train/adam.hpp"
#include "g4ds/train/losses.hpp"
#include "g4ds/train/model.hpp"

namespace g4ds::train {

struct ValidationScores {
    double psnr_color = 0.0;
    double psnr_feature = 0.0;
};

/// Held-out-view PSNR of both branches, averaged over all timesteps.
inline ValidationScores validate_holdout(Model& m, bool apply_field) {
    ValidationScores v;
    const int cam = m.scene.held_out_camera;
    const std::size_t T = m.scene.timestamps.size();
    double mse_c = 0.0, mse_f = 0.0;
    for (std::size_t j = 0; j < T; ++j) {
        Tape t(false);
        render::RenderResult r =
            render::render_scene(t, m.scene.gaussians, m.scene.deformation, m.heads,
                                 m.scene.cameras[static_cast<std::size_t>(cam)],
                                 m.scene.timestamps[j], render::RasterMode::Tiled, apply_field);
        const Tensor& gt = m.scene.gt(cam, static_cast<int>(j));
        EmbedLoss l = loss_embed(t, r, gt, m.revnet, 1.0, 1.0);
        mse_c += t.value(l.color_term).item();
        mse_f += t.value(l.feature_term).item();
    }
    v.psnr_color = psnr_from_mse(mse_c / static_cast<double>(T));
    v.psnr_feature = psnr_from_mse(mse_f / static_cast<double>(T));
    return v;
}

/// Stage 1: joint optimization of the embedded Gaussians, deformation field,
/// decoding heads and reversible network against ground truth. The coarse
/// phase keeps the deformation field frozen (renders are static); the fine
/// phase turns it on. One (camera, timestep) sample per step; the held-out
/// camera is never trained on. Emits CSV metrics ("step,phase,loss,color,
/// feature,psnr_c,psnr_f") when a log stream is given.
inline void train_stage1(Model& m, const io::RunConfig& cfg, std::ostream* log = nullptr,
                         std::ostream* progress = nullptr) {
    cfg.validate();
    const int total = cfg.stage1.coarse_iters + cfg.stage1.fine_iters;
    Rng rng(cfg.seed ^ 0x57A6E1ull);

    Adam opt;
    opt.add_group(m.scene_parameters(), cfg.stage1.lr_scene, cfg.stage1.lr_scene_final);
    opt.add_group(m.stage1_net_parameters(), cfg.stage1.lr_nets);
    opt.set_total_steps(total > 0 ? total : 1);

    std::vector<int> train_cams;
    for (std::size_t i = 0; i < m.scene.cameras.size(); ++i)
        if (static_cast<int>(i) != m.scene.held_out_camera) train_cams.push_back(static_cast<int>(i));
    if (train_cams.empty()) throw std::invalid_argument("train_stage1: no training cameras");

    if (log) *log << "step,phase,loss,color,feature,psnr_c,psnr_f\n";

    for (int step = 0; step < total; ++step) {
        const bool fine = step >= cfg.stage1.coarse_iters;
        const int cam = train_cams[rng.uniform_index(train_cams.size())];
        const int tj = static_cast<int>(rng.uniform_index(m.scene.timestamps.size()));

        opt.zero_grad();
        Tape t;
        render::RenderResult r = render::render_scene(
            t, m.scene.gaussians, m.scene.deformation, m.heads,
            m.scene.cameras[static_cast<std::size_t>(cam)],
            m.scene.timestamps[static_cast<std::size_t>(tj)], render::RasterMode::Tiled,
            /*apply_field=*/fine);
        EmbedLoss l = loss_embed(t, r, m.scene.gt(cam, tj), m.revnet,
                                 cfg.stage1.lambda_embed_color, cfg.stage1.lambda_embed_feature);
        const double loss_val = t.value(l.total).item();
        if (!std::isfinite(loss_val)) {
            std::ostringstream msg;
            msg << "train_stage1: non-finite loss at step " << step << " (phase "
                << (fine ? "fine" : "coarse") << ", camera " << cam << ", t index " << tj << ")";
            throw std::runtime_error(msg.str());
        }
        t.backward(l.total);
        opt.step();
        m.scene.gaussians.renormalize_rotations();

        const bool log_now = log && cfg.stage1.log_interval > 0 &&
                             (step % cfg.stage1.log_interval == 0 || step + 1 == total);
        const bool val_now = cfg.stage1.val_interval > 0 &&
                             (step % cfg.stage1.val_interval == 0 || step + 1 == total);
        if (log_now || (val_now && log)) {
            *log << step << "," << (fine ? "fine" : "coarse") << "," << loss_val << ","
                 << t.value(l.color_term).item() << "," << t.value(l.feature_term).item();
            if (val_now) {
                ValidationScores v = validate_holdout(m, fine);
                *log << "," << v.psnr_color << "," << v.psnr_feature;
                if (progress)
                    *progress << "stage1 step " << step << "/" << total << " loss " << loss_val
                              << " holdout psnr_c " << v.psnr_color << " psnr_f " << v.psnr_feature
                              << "\n";
            } else {
                *log << ",,";
            }
            *log << "\n";
        }
    }
    m.trained_stage = std::max(m.trained_stage, 1);
}

} // namespace g4ds::train
