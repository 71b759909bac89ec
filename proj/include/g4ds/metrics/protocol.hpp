#pragma once

#include <array>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "g4ds/metrics/warp.hpp"
#include "g4ds/nets/encoder.hpp"
#include "g4ds/pipeline/stylize.hpp"

namespace g4ds::metrics {

enum class Range { Short, Long };

struct ConsistencyReport {
    int camera_a = 0, camera_b = 0;
    int t_a = 0, t_b = 0;
    std::string family;       // "same_time" or "cross_time"
    std::string range;        // "short" or "long"
    double rmse = 0.0;        // ours
    double feat_dist = 0.0;   // ours
    double rmse_baseline = 0.0;
    double feat_dist_baseline = 0.0;
    double valid_fraction = 0.0;
};

/// Perceptual-style distance: mean squared difference of per-pixel
/// unit-normalized frozen-encoder activations, averaged over the three
/// stages. Invalid pixels are zeroed in both images before encoding.
inline double feature_distance(nets::FrozenEncoder& enc, const Tensor& a_hwc, const Tensor& b_hwc,
                               const std::vector<std::uint8_t>& mask) {
    const std::size_t H = a_hwc.dim(0), W = a_hwc.dim(1);
    auto masked_chw = [&](const Tensor& img) {
        Tensor out({3, H, W});
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                const bool ok = mask[y * W + x] != 0;
                for (std::size_t c = 0; c < 3; ++c)
                    out.at(c, y, x) = ok ? img.at(y, x, c) : 0.0;
            }
        return out;
    };
    Tape t(false);
    auto sa = enc.stages(t, t.constant(masked_chw(a_hwc)));
    auto sb = enc.stages(t, t.constant(masked_chw(b_hwc)));
    double total = 0.0;
    for (int s = 0; s < 3; ++s) {
        const Tensor& fa = t.value(sa[static_cast<std::size_t>(s)]);
        const Tensor& fb = t.value(sb[static_cast<std::size_t>(s)]);
        const std::size_t C = fa.dim(0), hw = fa.dim(1) * fa.dim(2);
        double acc = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
            double na = 1e-12, nb = 1e-12;
            for (std::size_t c = 0; c < C; ++c) {
                na += fa[c * hw + i] * fa[c * hw + i];
                nb += fb[c * hw + i] * fb[c * hw + i];
            }
            na = std::sqrt(na);
            nb = std::sqrt(nb);
            for (std::size_t c = 0; c < C; ++c) {
                const double d = fa[c * hw + i] / na - fb[c * hw + i] / nb;
                acc += d * d;
            }
        }
        total += acc / static_cast<double>(hw * C);
    }
    return total / 3.0;
}

struct ViewKey {
    int camera;
    int t_index;
};

/// View pairs for the protocol. Short range steps one camera along the ring;
/// long range steps three (spanning four adjacent views). Both a same-time
/// family and a cross-time family (timestamps advancing with the cameras)
/// are evaluated and reported separately.
inline std::vector<std::array<ViewKey, 2>> protocol_pairs(int n_cameras, int n_timesteps,
                                                          Range range, bool cross_time) {
    const int stride = range == Range::Short ? 1 : 3;
    std::vector<std::array<ViewKey, 2>> pairs;
    for (int cam = 0; cam + stride < n_cameras; ++cam)
        for (int tj = 0; tj < n_timesteps; ++tj) {
            const int tb = cross_time ? tj + stride : tj;
            if (tb >= n_timesteps) continue;
            pairs.push_back({ViewKey{cam, tj}, ViewKey{cam + stride, tb}});
        }
    return pairs;
}

/// Runs the consistency protocol for one style over the full pipeline and
/// the per-frame baseline, on identical flows and masks.
inline std::vector<ConsistencyReport> eval_protocol(train::Model& model,
                                                    const pipeline::StyleContext& style,
                                                    Range range, std::ostream* progress = nullptr) {
    const int n_cams = static_cast<int>(model.scene.cameras.size());
    const int n_ts = static_cast<int>(model.scene.timestamps.size());
    const wct::StyleTransform tr = pipeline::predict_style_transform(model, style);

    // Cache stylized views on demand (ours and baseline).
    std::map<int, pipeline::StylizedView> ours, baseline;
    auto view = [&](std::map<int, pipeline::StylizedView>& cache, bool is_baseline,
                    const ViewKey& k) -> pipeline::StylizedView& {
        const int key = k.camera * 1024 + k.t_index;
        auto it = cache.find(key);
        if (it == cache.end()) {
            const double time = model.scene.timestamps[static_cast<std::size_t>(k.t_index)];
            auto v = is_baseline
                         ? pipeline::stylize_view_baseline(model, style, k.camera, time)
                         : pipeline::stylize_view(model, tr, k.camera, time,
                                                  model.trained_stage >= 2);
            it = cache.emplace(key, std::move(v)).first;
        }
        return it->second;
    };

    std::vector<ConsistencyReport> reports;
    for (const bool cross_time : {false, true}) {
        for (const auto& pair : protocol_pairs(n_cams, n_ts, range, cross_time)) {
            const auto flow = scene::flow_oracle(model.scene, pair[0].camera, pair[0].t_index,
                                                 pair[1].camera, pair[1].t_index);
            if (flow.valid_fraction() <= 0.0) continue;
            ConsistencyReport rep;
            rep.camera_a = pair[0].camera;
            rep.camera_b = pair[1].camera;
            rep.t_a = pair[0].t_index;
            rep.t_b = pair[1].t_index;
            rep.family = cross_time ? "cross_time" : "same_time";
            rep.range = range == Range::Short ? "short" : "long";
            rep.valid_fraction = flow.valid_fraction();

            const auto& va = view(ours, false, pair[0]);
            const auto& vb = view(ours, false, pair[1]);
            const Tensor a = pipeline::chw_to_hwc(pipeline::clamp01(va.image));
            const Tensor b = pipeline::chw_to_hwc(pipeline::clamp01(vb.image));
            rep.rmse = consistency_rmse(a, b, flow);
            const Warped wb = warp(b, flow);
            rep.feat_dist = feature_distance(model.encoder, a, wb.image, wb.mask);

            const auto& ba = view(baseline, true, pair[0]);
            const auto& bb = view(baseline, true, pair[1]);
            const Tensor a2 = pipeline::chw_to_hwc(pipeline::clamp01(ba.image));
            const Tensor b2 = pipeline::chw_to_hwc(pipeline::clamp01(bb.image));
            rep.rmse_baseline = consistency_rmse(a2, b2, flow);
            const Warped wb2 = warp(b2, flow);
            rep.feat_dist_baseline = feature_distance(model.encoder, a2, wb2.image, wb2.mask);

            reports.push_back(rep);
            if (progress)
                *progress << "pair cam " << rep.camera_a << "->" << rep.camera_b << " t " << rep.t_a
                          << "->" << rep.t_b << " (" << rep.family << "): rmse " << rep.rmse
                          << " baseline " << rep.rmse_baseline << "\n";
        }
    }
    return reports;
}

struct ProtocolSummary {
    double mean_rmse = 0.0;
    double mean_feat_dist = 0.0;
    double mean_rmse_baseline = 0.0;
    double mean_feat_dist_baseline = 0.0;
    std::size_t pairs = 0;
};

inline ProtocolSummary summarize(const std::vector<ConsistencyReport>& reports) {
    ProtocolSummary s;
    for (const auto& r : reports) {
        s.mean_rmse += r.rmse;
        s.mean_feat_dist += r.feat_dist;
        s.mean_rmse_baseline += r.rmse_baseline;
        s.mean_feat_dist_baseline += r.feat_dist_baseline;
    }
    s.pairs = reports.size();
    if (s.pairs) {
        const double inv = 1.0 / static_cast<double>(s.pairs);
        s.mean_rmse *= inv;
        s.mean_feat_dist *= inv;
        s.mean_rmse_baseline *= inv;
        s.mean_feat_dist_baseline *= inv;
    }
    return s;
}

inline void write_reports_csv(std::ostream& out, const std::vector<ConsistencyReport>& reports) {
    out << "camera_a,camera_b,t_a,t_b,family,range,valid_fraction,rmse,feat_dist,"
           "rmse_baseline,feat_dist_baseline\n";
    for (const auto& r : reports)
        out << r.camera_a << "," << r.camera_b << "," << r.t_a << "," << r.t_b << "," << r.family
            << "," << r.range << "," << r.valid_fraction << "," << r.rmse << "," << r.feat_dist
            << "," << r.rmse_baseline << "," << r.feat_dist_baseline << "\n";
}

} // namespace g4ds::metrics
