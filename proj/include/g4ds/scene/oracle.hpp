#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "g4ds/core/linalg.hpp"
#include "g4ds/core/rng.hpp"
#include "g4ds/core/tensor.hpp"
#include "g4ds/scene/camera.hpp"

namespace g4ds::scene {

enum class MotionModel { Linear = 0, Orbital = 1 };

/// Smooth per-channel sinusoid over a unit direction; unshaded albedo, so the
/// same surface point has the same color from every view and time.
struct SurfaceTexture {
    double amp[3] = {0, 0, 0};
    Vec3 freq[3];
    double phase[3] = {0, 0, 0};

    static SurfaceTexture random(Rng& rng, double amp_max, double freq_max) {
        SurfaceTexture t;
        for (int c = 0; c < 3; ++c) {
            t.amp[c] = rng.uniform(0.15, amp_max);
            t.freq[c] = Vec3{rng.uniform(-freq_max, freq_max), rng.uniform(-freq_max, freq_max),
                             rng.uniform(-freq_max, freq_max)};
            t.phase[c] = rng.uniform(0.0, 6.283185307179586);
        }
        return t;
    }

    void color(const Vec3& n, double* rgb) const {
        for (int c = 0; c < 3; ++c)
            rgb[c] = 0.5 + amp[c] * std::sin(freq[c].dot(n) + phase[c]);
    }
};

/// One moving textured sphere. Linear motion translates the center along a
/// velocity; orbital motion carries it around the +y axis. Either way the
/// surface moves as a rigid translation of the instantaneous center, so
/// point correspondences across time are exact.
struct SpherePrimitive {
    Vec3 base_center;
    double radius = 0.5;
    Vec3 velocity;  // linear
    double omega = 0.0; // orbital, radians over unit time
    SurfaceTexture texture;

    Vec3 center_at(double t, MotionModel model) const {
        const double s = t - 0.5; // mid-time rest pose
        if (model == MotionModel::Linear) return base_center + velocity * s;
        const double a = omega * s;
        const double c = std::cos(a), sn = std::sin(a);
        return {c * base_center.x + sn * base_center.z, base_center.y,
                -sn * base_center.x + c * base_center.z};
    }
};

struct OracleHit {
    bool valid = false;
    double ray_t = 0.0;
    Vec3 point;
    int object = -1; // -1 = background shell, else sphere index
};

/// Closed-form scene behind the generator: textured spheres inside a large
/// textured background shell. Ground-truth images, exact correspondences and
/// occlusion tests all come from ray casts against these surfaces.
struct OracleScene {
    MotionModel motion = MotionModel::Linear;
    std::vector<SpherePrimitive> spheres;
    double background_radius = 8.0;
    SurfaceTexture background_texture;

    static constexpr double kRayEps = 1e-9;

    /// Nearest surface along origin + s*dir at time t. Rays start inside the
    /// background shell, so something is always hit.
    OracleHit raycast(const Vec3& origin, const Vec3& dir, double t) const {
        OracleHit best;
        for (std::size_t i = 0; i < spheres.size(); ++i) {
            const Vec3 c = spheres[i].center_at(t, motion);
            const Vec3 oc = origin - c;
            const double b = oc.dot(dir);
            const double disc = b * b - (oc.dot(oc) - spheres[i].radius * spheres[i].radius);
            if (disc < 0.0) continue;
            const double root = std::sqrt(disc);
            double s = -b - root;
            if (s < kRayEps) s = -b + root;
            if (s < kRayEps) continue;
            if (!best.valid || s < best.ray_t) {
                best.valid = true;
                best.ray_t = s;
                best.point = origin + dir * s;
                best.object = static_cast<int>(i);
            }
        }
        if (!best.valid) {
            // Inside the shell: take the far intersection.
            const double b = origin.dot(dir);
            const double disc = b * b - (origin.dot(origin) - background_radius * background_radius);
            const double s = -b + std::sqrt(std::max(disc, 0.0));
            best.valid = true;
            best.ray_t = s;
            best.point = origin + dir * s;
            best.object = -1;
        }
        return best;
    }

    void color_at(const OracleHit& hit, double t, double* rgb) const {
        if (hit.object < 0) {
            background_texture.color(hit.point * (1.0 / background_radius), rgb);
            return;
        }
        const auto& sp = spheres[static_cast<std::size_t>(hit.object)];
        const Vec3 n = (hit.point - sp.center_at(t, motion)) * (1.0 / sp.radius);
        sp.texture.color(n, rgb);
    }

    /// Where the surface point seen at time t sits at time t2.
    Vec3 point_at_time(const OracleHit& hit, double t, double t2) const {
        if (hit.object < 0) return hit.point;
        const auto& sp = spheres[static_cast<std::size_t>(hit.object)];
        return hit.point + (sp.center_at(t2, motion) - sp.center_at(t, motion));
    }

    /// True when `point` (on object `object` at time t) is the nearest
    /// surface seen from `eye`.
    bool visible_from(const Vec3& eye, const Vec3& point, int object, double t) const {
        const Vec3 diff = point - eye;
        const double dist = diff.norm();
        const OracleHit hit = raycast(eye, diff * (1.0 / dist), t);
        return hit.object == object && std::abs(hit.ray_t - dist) < 1e-6 * std::max(dist, 1.0);
    }

    /// Ray-traced ground-truth image {H,W,3} for a camera at time t.
    Tensor render(const Camera& cam, double t) const {
        Tensor img({static_cast<std::size_t>(cam.height), static_cast<std::size_t>(cam.width), 3});
        Vec3 origin, dir;
        double rgb[3];
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                cam.pixel_ray(x + 0.5, y + 0.5, origin, dir);
                const OracleHit hit = raycast(origin, dir, t);
                color_at(hit, t, rgb);
                for (int c = 0; c < 3; ++c)
                    img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x),
                           static_cast<std::size_t>(c)) = rgb[c];
            }
        return img;
    }
};

} // namespace g4ds::scene
