#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "g4ds/core/linalg.hpp"
#include "g4ds/core/tape.hpp"
#include "g4ds/scene/camera.hpp"

namespace g4ds::render {

inline constexpr double kZNear = 0.01;
inline constexpr double kCovRegularizer = 0.3;   // px^2 added to the diagonal
inline constexpr double kEllipseChi2 = 9.21034;  // 99% mass in 2D
inline constexpr double kAlphaClamp = 0.999;
inline constexpr double kAlphaCutoff = 1.0 / 255.0;
inline constexpr double kTransmittanceFloor = 1e-4;

/// Screen-space footprint of one projected Gaussian.
struct Splat2D {
    double u = 0, v = 0;          // mean, pixels
    double a = 0, b = 0, c = 0;   // covariance [[a,b],[b,c]], pixels^2
    double depth = 0;             // camera-space z
    int gaussian_index = -1;
};

/// Culling and footprint info shared between the projection and compositing
/// ops (not differentiated).
struct SplatBounds {
    std::vector<std::uint8_t> valid;
    std::vector<int> x0, y0, x1, y1; // pixel bbox, half-open
    std::vector<int> order;          // valid splats sorted by (depth, index)
};

/// EWA-style projection of a single Gaussian; nullopt when culled (behind
/// the near plane or the 99%-mass ellipse misses the frame).
inline std::optional<Splat2D> project_one(const Vec3& center, const Vec3& log_scale,
                                          const double quat[4], const scene::Camera& cam,
                                          int index = -1) {
    const Vec3 xc = cam.to_camera(center);
    if (xc.z <= kZNear) return std::nullopt;
    const double iz = 1.0 / xc.z;

    Splat2D s;
    s.gaussian_index = index;
    s.depth = xc.z;
    s.u = cam.fx * xc.x * iz + cam.cx;
    s.v = cam.fy * xc.y * iz + cam.cy;

    // M = J * R_cam, J the projection Jacobian at the center.
    const double j00 = cam.fx * iz, j02 = -cam.fx * xc.x * iz * iz;
    const double j11 = cam.fy * iz, j12 = -cam.fy * xc.y * iz * iz;
    double M[2][3];
    for (int k = 0; k < 3; ++k) {
        M[0][k] = j00 * cam.rotation(0, k) + j02 * cam.rotation(2, k);
        M[1][k] = j11 * cam.rotation(1, k) + j12 * cam.rotation(2, k);
    }

    const Mat3 rq = quat_to_mat(quat[0], quat[1], quat[2], quat[3]);
    const double d0 = std::exp(2.0 * log_scale.x);
    const double d1 = std::exp(2.0 * log_scale.y);
    const double d2 = std::exp(2.0 * log_scale.z);
    // V = Rq diag(exp(2 ls)) Rq^T
    double V[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
            V[i][j] = rq(i, 0) * d0 * rq(j, 0) + rq(i, 1) * d1 * rq(j, 1) + rq(i, 2) * d2 * rq(j, 2);
            V[j][i] = V[i][j];
        }
    double MV[2][3];
    for (int r = 0; r < 2; ++r)
        for (int j = 0; j < 3; ++j)
            MV[r][j] = M[r][0] * V[0][j] + M[r][1] * V[1][j] + M[r][2] * V[2][j];
    s.a = MV[0][0] * M[0][0] + MV[0][1] * M[0][1] + MV[0][2] * M[0][2] + kCovRegularizer;
    s.b = MV[0][0] * M[1][0] + MV[0][1] * M[1][1] + MV[0][2] * M[1][2];
    s.c = MV[1][0] * M[1][0] + MV[1][1] * M[1][1] + MV[1][2] * M[1][2] + kCovRegularizer;

    // 99%-mass radius from the larger eigenvalue.
    const double mid = 0.5 * (s.a + s.c);
    const double disc = std::sqrt(std::max(0.0, 0.25 * (s.a - s.c) * (s.a - s.c) + s.b * s.b));
    const double radius = std::sqrt(kEllipseChi2 * (mid + disc));
    if (s.u + radius < 0.0 || s.u - radius >= cam.width || s.v + radius < 0.0 ||
        s.v - radius >= cam.height)
        return std::nullopt;
    return s;
}

/// Pixel bounding box of the 99%-mass ellipse, clipped to the frame.
/// Returns false when the box is empty.
inline bool splat_bbox(double u, double v, double a, double b, double c, int width, int height,
                       int& x0, int& y0, int& x1, int& y1) {
    const double mid = 0.5 * (a + c);
    const double disc = std::sqrt(std::max(0.0, 0.25 * (a - c) * (a - c) + b * b));
    const double radius = std::sqrt(kEllipseChi2 * (mid + disc));
    x0 = std::max(0, static_cast<int>(std::floor(u - radius)));
    y0 = std::max(0, static_cast<int>(std::floor(v - radius)));
    x1 = std::min(width, static_cast<int>(std::ceil(u + radius)) + 1);
    y1 = std::min(height, static_cast<int>(std::ceil(v + radius)) + 1);
    return x1 > x0 && y1 > y0;
}

/// Bounds/ordering for an already-packed {N,6} splat tensor (rows of
/// u,v,a,b,c,depth). Rows whose ellipse misses the frame are invalid.
inline std::shared_ptr<SplatBounds> compute_bounds(const Tensor& packed, int width, int height) {
    const std::size_t n = packed.numel() ? packed.dim(0) : 0;
    auto bounds = std::make_shared<SplatBounds>();
    bounds->valid.assign(n, 0);
    bounds->x0.assign(n, 0);
    bounds->y0.assign(n, 0);
    bounds->x1.assign(n, 0);
    bounds->y1.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (splat_bbox(packed.at(i, 0), packed.at(i, 1), packed.at(i, 2), packed.at(i, 3),
                       packed.at(i, 4), width, height, bounds->x0[i], bounds->y0[i], bounds->x1[i],
                       bounds->y1[i]))
            bounds->valid[i] = 1;
    }
    bounds->order.clear();
    for (std::size_t i = 0; i < n; ++i)
        if (bounds->valid[i]) bounds->order.push_back(static_cast<int>(i));
    std::sort(bounds->order.begin(), bounds->order.end(), [&packed](int x, int y) {
        const double dx = packed.at(static_cast<std::size_t>(x), 5);
        const double dy = packed.at(static_cast<std::size_t>(y), 5);
        return dx < dy || (dx == dy && x < y);
    });
    return bounds;
}

/// Opacity-scaled Gaussian response at a pixel center, clamped at 0.999 and
/// zeroed below 1/255. Throws when the (regularized) covariance is singular.
inline double evaluate_alpha(const Splat2D& s, double opacity, double px, double py) {
    const double det = s.a * s.c - s.b * s.b;
    if (!(det > 0.0) || !std::isfinite(det))
        throw std::runtime_error("evaluate_alpha: covariance not positive definite");
    const double inv_det = 1.0 / det;
    const double dx = px - s.u;
    const double dy = py - s.v;
    const double m = (s.c * dx * dx - 2.0 * s.b * dx * dy + s.a * dy * dy) * inv_det;
    double alpha = opacity * std::exp(-0.5 * m);
    if (alpha > kAlphaClamp) alpha = kAlphaClamp;
    return alpha < kAlphaCutoff ? 0.0 : alpha;
}

/// Batched differentiable projection. Inputs are deformed {N,3} centers,
/// {N,3} log-scales and {N,4} unit quaternions; output is a packed {N,6}
/// tensor of (u, v, a, b, c, depth) rows. Culled rows are zero and flagged in
/// `bounds`. Gradients flow to all three inputs; depth participates only as
/// the sort key downstream, so its column usually carries no gradient.
inline Var project_gaussians(Tape& t, Var centers, Var log_scales, Var rotations,
                             const scene::Camera& cam, std::shared_ptr<SplatBounds>& bounds_out) {
    const Tensor& pc = t.value(centers);
    const Tensor& pl = t.value(log_scales);
    const Tensor& pq = t.value(rotations);
    const std::size_t n = pc.dim(0);

    auto bounds = std::make_shared<SplatBounds>();
    bounds->valid.assign(n, 0);
    bounds->x0.assign(n, 0);
    bounds->y0.assign(n, 0);
    bounds->x1.assign(n, 0);
    bounds->y1.assign(n, 0);

    Tensor packed({n, 6});
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 c{pc.at(i, 0), pc.at(i, 1), pc.at(i, 2)};
        const Vec3 ls{pl.at(i, 0), pl.at(i, 1), pl.at(i, 2)};
        const double q[4] = {pq.at(i, 0), pq.at(i, 1), pq.at(i, 2), pq.at(i, 3)};
        const auto s = project_one(c, ls, q, cam, static_cast<int>(i));
        if (!s) continue;
        bounds->valid[i] = 1;
        packed.at(i, 0) = s->u;
        packed.at(i, 1) = s->v;
        packed.at(i, 2) = s->a;
        packed.at(i, 3) = s->b;
        packed.at(i, 4) = s->c;
        packed.at(i, 5) = s->depth;
        splat_bbox(s->u, s->v, s->a, s->b, s->c, cam.width, cam.height, bounds->x0[i],
                   bounds->y0[i], bounds->x1[i], bounds->y1[i]);
    }

    // Canonical order: ascending depth, ties by index.
    bounds->order.clear();
    for (std::size_t i = 0; i < n; ++i)
        if (bounds->valid[i]) bounds->order.push_back(static_cast<int>(i));
    std::sort(bounds->order.begin(), bounds->order.end(), [&packed](int x, int y) {
        const double dx = packed.at(static_cast<std::size_t>(x), 5);
        const double dy = packed.at(static_cast<std::size_t>(y), 5);
        return dx < dy || (dx == dy && x < y);
    });
    bounds_out = bounds;

    const scene::Camera camera = cam;
    auto bounds_weak = bounds;
    return t.custom(std::move(packed), {centers.id, log_scales.id, rotations.id},
                    [camera, bounds_weak, n](Tape& tp, int id) {
        const auto& node = tp.node(id);
        const Tensor& g = node.grad;
        const Tensor& pc = tp.node(node.parents[0]).value;
        const Tensor& pl = tp.node(node.parents[1]).value;
        const Tensor& pq = tp.node(node.parents[2]).value;
        Tensor& gc = tp.grad_mut(node.parents[0]);
        Tensor& gl = tp.grad_mut(node.parents[1]);
        Tensor& gq = tp.grad_mut(node.parents[2]);

        for (std::size_t i = 0; i < n; ++i) {
            if (!bounds_weak->valid[i]) continue;
            const double gu = g.at(i, 0), gv = g.at(i, 1);
            const double ga = g.at(i, 2), gb = g.at(i, 3), gcv = g.at(i, 4);
            const double gd = g.at(i, 5);
            if (gu == 0 && gv == 0 && ga == 0 && gb == 0 && gcv == 0 && gd == 0) continue;

            const Vec3 c{pc.at(i, 0), pc.at(i, 1), pc.at(i, 2)};
            const Vec3 xc = camera.to_camera(c);
            const double iz = 1.0 / xc.z;
            const double q[4] = {pq.at(i, 0), pq.at(i, 1), pq.at(i, 2), pq.at(i, 3)};
            const Mat3 rq = quat_to_mat(q[0], q[1], q[2], q[3]);
            const double e2[3] = {std::exp(2.0 * pl.at(i, 0)), std::exp(2.0 * pl.at(i, 1)),
                                  std::exp(2.0 * pl.at(i, 2))};

            const double j00 = camera.fx * iz, j02 = -camera.fx * xc.x * iz * iz;
            const double j11 = camera.fy * iz, j12 = -camera.fy * xc.y * iz * iz;
            double M[2][3];
            for (int k = 0; k < 3; ++k) {
                M[0][k] = j00 * camera.rotation(0, k) + j02 * camera.rotation(2, k);
                M[1][k] = j11 * camera.rotation(1, k) + j12 * camera.rotation(2, k);
            }
            double V[3][3];
            for (int r = 0; r < 3; ++r)
                for (int s2 = 0; s2 < 3; ++s2)
                    V[r][s2] = rq(r, 0) * e2[0] * rq(s2, 0) + rq(r, 1) * e2[1] * rq(s2, 1) +
                               rq(r, 2) * e2[2] * rq(s2, 2);

            // G = [[ga, gb/2],[gb/2, gc]] so trace(G^T dCov) recovers the
            // packed gradients with b counted once.
            const double G[2][2] = {{ga, 0.5 * gb}, {0.5 * gb, gcv}};

            // dV = M^T G M
            double GM[2][3];
            for (int r = 0; r < 2; ++r)
                for (int k = 0; k < 3; ++k) GM[r][k] = G[r][0] * M[0][k] + G[r][1] * M[1][k];
            double dV[3][3];
            for (int r = 0; r < 3; ++r)
                for (int s2 = 0; s2 < 3; ++s2)
                    dV[r][s2] = M[0][r] * GM[0][s2] + M[1][r] * GM[1][s2];

            // dM = 2 G M V
            double MV[2][3];
            for (int r = 0; r < 2; ++r)
                for (int k = 0; k < 3; ++k)
                    MV[r][k] = M[r][0] * V[0][k] + M[r][1] * V[1][k] + M[r][2] * V[2][k];
            double dM[2][3];
            for (int r = 0; r < 2; ++r)
                for (int k = 0; k < 3; ++k)
                    dM[r][k] = 2.0 * (G[r][0] * MV[0][k] + G[r][1] * MV[1][k]);

            // dJ = dM R^T (only the four nonzero J entries matter).
            double dJ00 = 0, dJ02 = 0, dJ11 = 0, dJ12 = 0;
            for (int k = 0; k < 3; ++k) {
                dJ00 += dM[0][k] * camera.rotation(0, k);
                dJ02 += dM[0][k] * camera.rotation(2, k);
                dJ11 += dM[1][k] * camera.rotation(1, k);
                dJ12 += dM[1][k] * camera.rotation(2, k);
            }

            // Camera-space position gradient.
            Vec3 dxc{0, 0, 0};
            dxc.x += dJ02 * (-camera.fx * iz * iz);
            dxc.y += dJ12 * (-camera.fy * iz * iz);
            dxc.z += dJ00 * (-camera.fx * iz * iz) + dJ11 * (-camera.fy * iz * iz) +
                     dJ02 * (2.0 * camera.fx * xc.x * iz * iz * iz) +
                     dJ12 * (2.0 * camera.fy * xc.y * iz * iz * iz);
            dxc.x += gu * camera.fx * iz;
            dxc.y += gv * camera.fy * iz;
            dxc.z += gu * (-camera.fx * xc.x * iz * iz) + gv * (-camera.fy * xc.y * iz * iz);
            dxc.z += gd;
            const Vec3 dc = camera.rotation.tmul(dxc);
            gc.at(i, 0) += dc.x;
            gc.at(i, 1) += dc.y;
            gc.at(i, 2) += dc.z;

            // Scale gradient: dD = Rq^T dV Rq, diagonal only.
            for (int axis = 0; axis < 3; ++axis) {
                double dd = 0.0;
                for (int r = 0; r < 3; ++r)
                    for (int s2 = 0; s2 < 3; ++s2) dd += rq(r, axis) * dV[r][s2] * rq(s2, axis);
                gl.at(i, static_cast<std::size_t>(axis)) += dd * 2.0 * e2[axis];
            }

            // Quaternion gradient: dRq = 2 dV Rq D.
            double dRq[3][3];
            for (int r = 0; r < 3; ++r)
                for (int k = 0; k < 3; ++k) {
                    double acc = 0.0;
                    for (int s2 = 0; s2 < 3; ++s2) acc += dV[r][s2] * rq(s2, k);
                    dRq[r][k] = 2.0 * acc * e2[k];
                }
            const auto jac = quat_to_mat_jacobian(q[0], q[1], q[2], q[3]);
            for (int k = 0; k < 4; ++k) {
                double acc = 0.0;
                for (int r = 0; r < 3; ++r)
                    for (int s2 = 0; s2 < 3; ++s2) acc += dRq[r][s2] * jac[static_cast<std::size_t>(k)](r, s2);
                gq.at(i, static_cast<std::size_t>(k)) += acc;
            }
        }
    });
}

} // namespace g4ds::render
