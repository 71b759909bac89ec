#pragma once

#include <string>
#include <vector>

#include "g4ds/io/checkpoint.hpp"
#include "g4ds/nets/cspn.hpp"
#include "g4ds/nets/encoder.hpp"
#include "g4ds/nets/extractors.hpp"
#include "g4ds/nets/revnet.hpp"
#include "g4ds/render/render.hpp"
#include "g4ds/scene/generate.hpp"

namespace g4ds::train {

/// Everything the pipeline trains or renders with, plus the scene it was
/// trained on. Checkpoints are self-contained: scene geometry, cameras,
/// oracle parameters and ground truth ride along so downstream commands
/// need only the checkpoint file.
struct Model {
    scene::SceneBundle scene;
    render::RenderHeads heads;
    nets::RevNet revnet;
    nets::ContentExtractor phi_c;
    nets::StyleExtractor phi_s;
    nets::TransformPredictor mlp_c;
    nets::TransformPredictor mlp_s;
    nets::Cspn cspn;
    nets::FrozenEncoder encoder;
    int trained_stage = 0; // 0 = fresh, 1 = embedding done, 2 = style done

    static Model create(scene::SceneBundle bundle, std::uint64_t seed) {
        Model m;
        m.scene = std::move(bundle);
        Rng rng(seed ^ 0x4d0de1ull);
        Rng r1 = rng.fork(1), r2 = rng.fork(2), r3 = rng.fork(3), r4 = rng.fork(4),
            r5 = rng.fork(5), r6 = rng.fork(6), r7 = rng.fork(7);
        m.heads = render::RenderHeads(r1);
        m.revnet = nets::RevNet("rev", r2);
        m.phi_c = nets::ContentExtractor("phi_c", r3);
        m.phi_s = nets::StyleExtractor("phi_s", r4);
        m.mlp_c = nets::TransformPredictor("mlp_c", r5);
        m.mlp_s = nets::TransformPredictor("mlp_s", r6);
        m.cspn = nets::Cspn("cspn", r7);
        return m;
    }

    std::vector<Parameter*> scene_parameters() {
        auto ps = scene.gaussians.parameters();
        auto pd = scene.deformation.parameters();
        ps.insert(ps.end(), pd.begin(), pd.end());
        return ps;
    }

    std::vector<Parameter*> stage1_net_parameters() {
        auto ps = heads.parameters();
        auto pr = revnet.parameters();
        ps.insert(ps.end(), pr.begin(), pr.end());
        return ps;
    }

    std::vector<Parameter*> stage1_parameters() {
        auto ps = scene_parameters();
        auto pn = stage1_net_parameters();
        ps.insert(ps.end(), pn.begin(), pn.end());
        return ps;
    }

    std::vector<Parameter*> stage2_parameters() {
        std::vector<Parameter*> ps;
        for (auto* p : phi_c.parameters()) ps.push_back(p);
        for (auto* p : phi_s.parameters()) ps.push_back(p);
        for (auto* p : mlp_c.parameters()) ps.push_back(p);
        for (auto* p : mlp_s.parameters()) ps.push_back(p);
        for (auto* p : cspn.parameters()) ps.push_back(p);
        return ps;
    }

    std::vector<Parameter*> all_parameters() {
        auto ps = stage1_parameters();
        auto p2 = stage2_parameters();
        ps.insert(ps.end(), p2.begin(), p2.end());
        return ps;
    }

    io::Checkpoint to_checkpoint() {
        io::Checkpoint ck;
        ck.put_scalar("meta.stage", trained_stage);
        ck.put_scalar("meta.seed", static_cast<double>(scene.seed));

        for (Parameter* p : all_parameters()) ck.put(p->name, p->value);

        // Scene block (numeric, self-contained).
        const auto& cams = scene.cameras;
        Tensor cam_t({cams.size(), 18});
        for (std::size_t i = 0; i < cams.size(); ++i) {
            const auto& c = cams[i];
            double* row = cam_t.data() + i * 18;
            row[0] = c.fx;
            row[1] = c.fy;
            row[2] = c.cx;
            row[3] = c.cy;
            row[4] = c.width;
            row[5] = c.height;
            for (int k = 0; k < 9; ++k) row[6 + k] = c.rotation.m[static_cast<std::size_t>(k)];
            row[15] = c.translation.x;
            row[16] = c.translation.y;
            row[17] = c.translation.z;
        }
        ck.put("scene.cameras", cam_t);
        ck.put("scene.timestamps", Tensor({scene.timestamps.size()},
                                          std::vector<double>(scene.timestamps.begin(),
                                                              scene.timestamps.end())));
        ck.put_scalar("scene.held_out_camera", scene.held_out_camera);
        ck.put("scene.spec",
               Tensor({7}, {static_cast<double>(scene.spec.primitives),
                            static_cast<double>(static_cast<int>(scene.spec.motion)),
                            static_cast<double>(scene.spec.cameras),
                            static_cast<double>(scene.spec.resolution),
                            static_cast<double>(scene.spec.timesteps),
                            static_cast<double>(scene.spec.gaussians), scene.spec.motion_scale}));

        const auto& o = scene.oracle;
        ck.put_scalar("scene.oracle.motion", static_cast<double>(static_cast<int>(o.motion)));
        ck.put_scalar("scene.oracle.background_radius", o.background_radius);
        auto texture_tensor = [](const scene::SurfaceTexture& tex) {
            Tensor t({3, 5});
            for (std::size_t c = 0; c < 3; ++c) {
                t.at(c, 0) = tex.amp[c];
                t.at(c, 1) = tex.freq[c].x;
                t.at(c, 2) = tex.freq[c].y;
                t.at(c, 3) = tex.freq[c].z;
                t.at(c, 4) = tex.phase[c];
            }
            return t;
        };
        ck.put("scene.oracle.background_texture", texture_tensor(o.background_texture));
        Tensor spheres({o.spheres.size(), 8 + 15});
        for (std::size_t i = 0; i < o.spheres.size(); ++i) {
            const auto& sp = o.spheres[i];
            double* row = spheres.data() + i * 23;
            row[0] = sp.base_center.x;
            row[1] = sp.base_center.y;
            row[2] = sp.base_center.z;
            row[3] = sp.radius;
            row[4] = sp.velocity.x;
            row[5] = sp.velocity.y;
            row[6] = sp.velocity.z;
            row[7] = sp.omega;
            const Tensor tex = texture_tensor(sp.texture);
            for (int k = 0; k < 15; ++k) row[8 + k] = tex[static_cast<std::size_t>(k)];
        }
        ck.put("scene.oracle.spheres", spheres);

        ck.put("deform.aabb",
               Tensor({6}, {scene.deformation.aabb_min().x, scene.deformation.aabb_min().y,
                            scene.deformation.aabb_min().z, scene.deformation.aabb_max().x,
                            scene.deformation.aabb_max().y, scene.deformation.aabb_max().z}));
        {
            const auto& res = scene.deformation.resolutions();
            Tensor rt({res.size()});
            for (std::size_t i = 0; i < res.size(); ++i) rt[i] = res[i];
            ck.put("deform.resolutions", rt);
        }

        // Ground truth as f32 (training targets are 8-bit quantized anyway).
        if (!scene.ground_truth.empty()) {
            const std::size_t K = scene.cameras.size(), T = scene.timestamps.size();
            const std::size_t H = scene.ground_truth[0].dim(0), W = scene.ground_truth[0].dim(1);
            Tensor gt({K, T, H, W, 3});
            double* dst = gt.data();
            for (const auto& img : scene.ground_truth) {
                std::copy(img.data(), img.data() + img.numel(), dst);
                dst += img.numel();
            }
            ck.put("scene.gt", gt, io::Dtype::F32);
        }
        return ck;
    }

    static Model from_checkpoint(const io::Checkpoint& ck) {
        Model m;
        m.trained_stage = static_cast<int>(ck.get_scalar("meta.stage"));

        scene::SceneBundle& b = m.scene;
        b.seed = static_cast<std::uint64_t>(ck.get_scalar("meta.seed"));
        const Tensor& spec = ck.get("scene.spec");
        b.spec.primitives = static_cast<int>(spec[0]);
        b.spec.motion = static_cast<scene::MotionModel>(static_cast<int>(spec[1]));
        b.spec.cameras = static_cast<int>(spec[2]);
        b.spec.resolution = static_cast<int>(spec[3]);
        b.spec.timesteps = static_cast<int>(spec[4]);
        b.spec.gaussians = static_cast<int>(spec[5]);
        b.spec.motion_scale = spec[6];

        const Tensor& cam_t = ck.get("scene.cameras");
        for (std::size_t i = 0; i < cam_t.dim(0); ++i) {
            scene::Camera c;
            const double* row = cam_t.data() + i * 18;
            c.fx = row[0];
            c.fy = row[1];
            c.cx = row[2];
            c.cy = row[3];
            c.width = static_cast<int>(row[4]);
            c.height = static_cast<int>(row[5]);
            for (int k = 0; k < 9; ++k) c.rotation.m[static_cast<std::size_t>(k)] = row[6 + k];
            c.translation = Vec3{row[15], row[16], row[17]};
            b.cameras.push_back(c);
        }
        const Tensor& ts = ck.get("scene.timestamps");
        b.timestamps.assign(ts.data(), ts.data() + ts.numel());
        b.held_out_camera = static_cast<int>(ck.get_scalar("scene.held_out_camera"));

        auto texture_from = [](const Tensor& t) {
            scene::SurfaceTexture tex;
            for (std::size_t c = 0; c < 3; ++c) {
                tex.amp[c] = t.at(c, 0);
                tex.freq[c] = Vec3{t.at(c, 1), t.at(c, 2), t.at(c, 3)};
                tex.phase[c] = t.at(c, 4);
            }
            return tex;
        };
        b.oracle.motion = static_cast<scene::MotionModel>(
            static_cast<int>(ck.get_scalar("scene.oracle.motion")));
        b.oracle.background_radius = ck.get_scalar("scene.oracle.background_radius");
        b.oracle.background_texture = texture_from(ck.get("scene.oracle.background_texture"));
        const Tensor& spheres = ck.get("scene.oracle.spheres");
        for (std::size_t i = 0; i < spheres.dim(0); ++i) {
            const double* row = spheres.data() + i * 23;
            scene::SpherePrimitive sp;
            sp.base_center = Vec3{row[0], row[1], row[2]};
            sp.radius = row[3];
            sp.velocity = Vec3{row[4], row[5], row[6]};
            sp.omega = row[7];
            Tensor tex({3, 5});
            for (int k = 0; k < 15; ++k) tex[static_cast<std::size_t>(k)] = row[8 + k];
            sp.texture = texture_from(tex);
            b.oracle.spheres.push_back(sp);
        }

        if (ck.has("scene.gt")) {
            const Tensor& gt = ck.get("scene.gt");
            const std::size_t K = gt.dim(0), T = gt.dim(1), H = gt.dim(2), W = gt.dim(3);
            const double* src = gt.data();
            for (std::size_t i = 0; i < K * T; ++i) {
                Tensor img({H, W, 3});
                std::copy(src, src + img.numel(), img.data());
                src += img.numel();
                b.ground_truth.push_back(std::move(img));
            }
        }

        // Rebuild parameter holders at the right sizes, then overwrite values.
        const std::size_t n = ck.get("gaussians.centers").dim(0);
        b.gaussians = scene::GaussianCloud(n);
        const Tensor& aabb = ck.get("deform.aabb");
        const Tensor& res_t = ck.get("deform.resolutions");
        std::vector<int> res;
        for (std::size_t i = 0; i < res_t.numel(); ++i) res.push_back(static_cast<int>(res_t[i]));
        Rng dummy(0);
        b.deformation = scene::DeformationField(Vec3{aabb[0], aabb[1], aabb[2]},
                                                Vec3{aabb[3], aabb[4], aabb[5]}, dummy, res);
        Rng dummy2(0);
        m.heads = render::RenderHeads(dummy2);
        m.revnet = nets::RevNet("rev", dummy2);
        m.phi_c = nets::ContentExtractor("phi_c", dummy2);
        m.phi_s = nets::StyleExtractor("phi_s", dummy2);
        m.mlp_c = nets::TransformPredictor("mlp_c", dummy2);
        m.mlp_s = nets::TransformPredictor("mlp_s", dummy2);
        m.cspn = nets::Cspn("cspn", dummy2);

        for (Parameter* p : m.all_parameters()) {
            const Tensor& v = ck.get(p->name);
            if (!v.same_shape(p->value))
                throw std::runtime_error("checkpoint: shape mismatch for " + p->name);
            p->value = v;
        }
        return m;
    }

    void save(const std::string& path) { to_checkpoint().save(path); }

    static Model load(const std::string& path) {
        return from_checkpoint(io::Checkpoint::load(path));
    }
};

} // namespace g4ds::train
