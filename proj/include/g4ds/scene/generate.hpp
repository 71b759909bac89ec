#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "g4ds/metrics/flow_field.hpp"
#include "g4ds/scene/camera.hpp"
#include "g4ds/scene/deformation.hpp"
#include "g4ds/scene/gaussians.hpp"
#include "g4ds/scene/oracle.hpp"

namespace g4ds::scene {

/// Procedural scene recipe. The reference configuration used by the
/// end-to-end runs is the default.
struct SceneSpec {
    int primitives = 1;       // moving textured spheres
    MotionModel motion = MotionModel::Linear;
    int cameras = 6;          // ring around the origin
    int resolution = 64;      // square images
    int timesteps = 8;
    int gaussians = 2000;
    double motion_scale = 1.0; // scales velocities; 0 freezes the scene

    static SceneSpec reference() { return SceneSpec{}; }
};

struct SceneBundle {
    SceneSpec spec;
    std::uint64_t seed = 0;
    GaussianCloud gaussians;
    DeformationField deformation;
    std::vector<Camera> cameras;
    std::vector<double> timestamps;
    OracleScene oracle;
    std::vector<Tensor> ground_truth; // [camera * timesteps + t], each {H,W,3}
    int held_out_camera = 0;

    const Tensor& gt(int camera, int t_index) const {
        return ground_truth[static_cast<std::size_t>(camera) * timestamps.size() +
                            static_cast<std::size_t>(t_index)];
    }
};

namespace detail {

inline Vec3 random_unit(Rng& rng) {
    // Uniform direction via normalized Gaussian triple.
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = v.norm();
    return n > 1e-12 ? v * (1.0 / n) : Vec3{1, 0, 0};
}

} // namespace detail

/// Deterministic procedural scene: oracle surfaces, camera ring, ray-traced
/// ground truth and a Gaussian initialization seeded on the oracle surfaces.
inline SceneBundle generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    if (spec.resolution < 16 || spec.resolution > 512)
        throw std::invalid_argument("generate_scene: resolution must be within [16, 512]");
    if (spec.primitives < 1 || spec.cameras < 2 || spec.timesteps < 1 || spec.gaussians < 64)
        throw std::invalid_argument("generate_scene: degenerate spec");

    SceneBundle b;
    b.spec = spec;
    b.seed = seed;
    Rng rng(seed);

    // Oracle surfaces.
    b.oracle.motion = spec.motion;
    b.oracle.background_radius = 8.0;
    Rng bg_rng = rng.fork(1);
    b.oracle.background_texture = SurfaceTexture::random(bg_rng, 0.30, 2.5);
    Rng prim_rng = rng.fork(2);
    for (int i = 0; i < spec.primitives; ++i) {
        SpherePrimitive sp;
        const double ring = spec.primitives == 1 ? 0.0 : 1.0;
        const double angle = 6.283185307179586 * i / spec.primitives;
        sp.base_center = Vec3{ring * std::cos(angle), prim_rng.uniform(-0.3, 0.3),
                              ring * std::sin(angle)};
        sp.radius = prim_rng.uniform(0.5, 0.7);
        if (spec.motion == MotionModel::Linear) {
            Vec3 dir = detail::random_unit(prim_rng);
            dir.y *= 0.3; // keep motion mostly in-plane
            sp.velocity = dir.normalized() * (prim_rng.uniform(0.6, 0.9) * spec.motion_scale);
        } else {
            sp.omega = prim_rng.uniform(0.5, 0.9) * (prim_rng.uniform() < 0.5 ? -1.0 : 1.0) *
                       spec.motion_scale;
            if (sp.base_center.norm() < 0.4) sp.base_center.x += 1.0; // orbital needs a lever arm
        }
        sp.texture = SurfaceTexture::random(prim_rng, 0.35, 3.5);
        b.oracle.spheres.push_back(sp);
    }

    // Camera ring (slightly above the plane, looking at the origin).
    const double focal = static_cast<double>(spec.resolution);
    for (int i = 0; i < spec.cameras; ++i) {
        const double a = 6.283185307179586 * i / spec.cameras;
        const Vec3 eye{4.0 * std::cos(a), 1.0, 4.0 * std::sin(a)};
        b.cameras.push_back(Camera::look_at(eye, Vec3{0, 0, 0}, focal, focal, spec.resolution,
                                            spec.resolution));
    }
    b.held_out_camera = spec.cameras - 1;

    b.timestamps.resize(static_cast<std::size_t>(spec.timesteps));
    for (int j = 0; j < spec.timesteps; ++j)
        b.timestamps[static_cast<std::size_t>(j)] =
            spec.timesteps == 1 ? 0.0 : static_cast<double>(j) / (spec.timesteps - 1);

    // Ground truth from the oracle.
    for (int cam = 0; cam < spec.cameras; ++cam)
        for (int j = 0; j < spec.timesteps; ++j)
            b.ground_truth.push_back(
                b.oracle.render(b.cameras[static_cast<std::size_t>(cam)],
                                b.timestamps[static_cast<std::size_t>(j)]));

    // Deformation field over a box enclosing the background shell.
    Rng field_rng = rng.fork(3);
    b.deformation = DeformationField(Vec3{-8.5, -8.5, -8.5}, Vec3{8.5, 8.5, 8.5}, field_rng);

    // Gaussians seeded on the mid-time surfaces, colors in the first three
    // feature channels.
    Rng gauss_rng = rng.fork(4);
    const std::size_t n = static_cast<std::size_t>(spec.gaussians);
    b.gaussians = GaussianCloud(n);
    const std::size_t n_bg = static_cast<std::size_t>(0.45 * static_cast<double>(n));
    const std::size_t n_obj = n - n_bg;
    const std::size_t per_sphere = n_obj / b.oracle.spheres.size();
    double rgb[3];
    std::size_t idx = 0;
    for (std::size_t s = 0; s < b.oracle.spheres.size(); ++s) {
        const auto& sp = b.oracle.spheres[s];
        const Vec3 c_mid = sp.center_at(0.5, b.oracle.motion);
        const std::size_t count = (s + 1 == b.oracle.spheres.size()) ? (n_obj - per_sphere * s)
                                                                     : per_sphere;
        const double spacing =
            std::sqrt(4.0 * 3.14159265358979 * sp.radius * sp.radius / static_cast<double>(count));
        const double log_scale = std::log(0.6 * spacing);
        for (std::size_t k = 0; k < count; ++k, ++idx) {
            const Vec3 dir = detail::random_unit(gauss_rng);
            const Vec3 p = c_mid + dir * sp.radius;
            b.gaussians.centers.value.at(idx, 0) = p.x;
            b.gaussians.centers.value.at(idx, 1) = p.y;
            b.gaussians.centers.value.at(idx, 2) = p.z;
            for (int c = 0; c < 3; ++c) b.gaussians.log_scales.value.at(idx, c) = log_scale;
            sp.texture.color(dir, rgb);
            for (int c = 0; c < 3; ++c) b.gaussians.features.value.at(idx, c) = rgb[c];
            b.gaussians.opacity_logits.value.at(idx, 0) = 2.2; // sigma ~ 0.9
        }
    }
    {
        const double r_bg = b.oracle.background_radius;
        const double spacing =
            std::sqrt(4.0 * 3.14159265358979 * r_bg * r_bg / static_cast<double>(n_bg));
        const double log_scale = std::log(0.6 * spacing);
        for (; idx < n; ++idx) {
            const Vec3 dir = detail::random_unit(gauss_rng);
            const Vec3 p = dir * r_bg;
            b.gaussians.centers.value.at(idx, 0) = p.x;
            b.gaussians.centers.value.at(idx, 1) = p.y;
            b.gaussians.centers.value.at(idx, 2) = p.z;
            for (int c = 0; c < 3; ++c) b.gaussians.log_scales.value.at(idx, c) = log_scale;
            b.oracle.background_texture.color(dir, rgb);
            for (int c = 0; c < 3; ++c) b.gaussians.features.value.at(idx, c) = rgb[c];
            b.gaussians.opacity_logits.value.at(idx, 0) = 2.2;
        }
    }
    return b;
}

/// Exact correspondences between two (camera, timestep) views of one bundle,
/// on the source view's pixel grid. Pixels are invalid where the carried
/// surface point is behind the target camera, off-frame, or occluded.
inline metrics::FlowField flow_oracle(const SceneBundle& bundle, int from_camera, int from_t,
                                      int to_camera, int to_t) {
    const int n_cams = static_cast<int>(bundle.cameras.size());
    const int n_ts = static_cast<int>(bundle.timestamps.size());
    if (from_camera < 0 || from_camera >= n_cams || to_camera < 0 || to_camera >= n_cams ||
        from_t < 0 || from_t >= n_ts || to_t < 0 || to_t >= n_ts)
        throw std::invalid_argument("flow_oracle: view not in bundle");

    const Camera& ca = bundle.cameras[static_cast<std::size_t>(from_camera)];
    const Camera& cb = bundle.cameras[static_cast<std::size_t>(to_camera)];
    const double t1 = bundle.timestamps[static_cast<std::size_t>(from_t)];
    const double t2 = bundle.timestamps[static_cast<std::size_t>(to_t)];
    const Vec3 eye_b = cb.rotation.tmul(cb.translation * -1.0);

    metrics::FlowField flow(ca.width, ca.height);
    if (from_camera == to_camera && from_t == to_t) return flow; // identity view

    Vec3 origin, dir;
    for (int y = 0; y < ca.height; ++y)
        for (int x = 0; x < ca.width; ++x) {
            const std::size_t i = flow.index(x, y);
            ca.pixel_ray(x + 0.5, y + 0.5, origin, dir);
            const OracleHit hit = bundle.oracle.raycast(origin, dir, t1);
            const Vec3 p2 = bundle.oracle.point_at_time(hit, t1, t2);
            const Vec3 pc = cb.to_camera(p2);
            if (pc.z <= 0.01) {
                flow.mask[i] = 0;
                continue;
            }
            const Vec2 px = cb.project_camera(pc);
            if (!cb.in_frame(px)) {
                flow.mask[i] = 0;
                continue;
            }
            if (!bundle.oracle.visible_from(eye_b, p2, hit.object, t2)) {
                flow.mask[i] = 0;
                continue;
            }
            flow.dx[i] = px.x - (x + 0.5);
            flow.dy[i] = px.y - (y + 0.5);
        }
    return flow;
}

} // namespace g4ds::scene
