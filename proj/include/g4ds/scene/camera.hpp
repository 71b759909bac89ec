#pragma once

#include <cmath>
#include <stdexcept>

#include "g4ds/core/linalg.hpp"

namespace g4ds::scene {

/// Pinhole camera: intrinsics in pixels, extrinsics mapping world to camera
/// (x_cam = R x_world + T). Camera frame: +x right, +z forward.
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    Mat3 rotation;
    Vec3 translation;

    Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }

    /// Projects a camera-space point; caller checks z > 0.
    Vec2 project_camera(const Vec3& pc) const {
        return {fx * pc.x / pc.z + cx, fy * pc.y / pc.z + cy};
    }

    Vec2 project(const Vec3& world) const { return project_camera(to_camera(world)); }

    bool in_frame(const Vec2& px, double margin = 0.0) const {
        return px.x >= -margin && px.x < width + margin && px.y >= -margin &&
               px.y < height + margin;
    }

    /// World-space ray through a pixel center.
    void pixel_ray(double px, double py, Vec3& origin, Vec3& dir) const {
        const Vec3 d_cam{(px - cx) / fx, (py - cy) / fy, 1.0};
        origin = rotation.tmul(translation * -1.0);
        dir = rotation.tmul(d_cam).normalized();
    }

    void validate() const {
        if (fx <= 0 || fy <= 0) throw std::invalid_argument("camera: focal lengths must be positive");
        Mat3 rrt = rotation * rotation.transposed();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (std::abs(rrt(i, j) - (i == j ? 1.0 : 0.0)) > 1e-9)
                    throw std::invalid_argument("camera: rotation is not orthonormal");
    }

    /// Camera at `eye` looking at `target` (world up +y).
    static Camera look_at(const Vec3& eye, const Vec3& target, double fx, double fy, int width,
                          int height) {
        Camera c;
        c.fx = fx;
        c.fy = fy;
        c.cx = 0.5 * width;
        c.cy = 0.5 * height;
        c.width = width;
        c.height = height;
        const Vec3 fwd = (target - eye).normalized();
        Vec3 up{0.0, 1.0, 0.0};
        if (std::abs(fwd.dot(up)) > 0.999) up = Vec3{1.0, 0.0, 0.0};
        const Vec3 right = up.cross(fwd).normalized();
        const Vec3 down = fwd.cross(right);
        for (int j = 0; j < 3; ++j) {
            c.rotation(0, j) = j == 0 ? right.x : (j == 1 ? right.y : right.z);
            c.rotation(1, j) = j == 0 ? down.x : (j == 1 ? down.y : down.z);
            c.rotation(2, j) = j == 0 ? fwd.x : (j == 1 ? fwd.y : fwd.z);
        }
        c.translation = c.rotation * (eye * -1.0);
        return c;
    }
};

} // namespace g4ds::scene
