#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "g4ds/core/linalg.hpp"
#include "g4ds/core/tape.hpp"
#include "g4ds/nets/mlp.hpp"
#include "g4ds/scene/gaussians.hpp"

namespace g4ds::scene {

/// Space-time deformation field: six factor planes over the axis pairs
/// {xy,xz,yz,xt,yt,zt} at two resolutions, fused per resolution as
/// xy*zt + xz*yt + yz*xt (each product covers all four coordinates), then a
/// small decoder MLP emits per-Gaussian deltas for center (3), log_scale (3)
/// and rotation (4). The decoder's final layer starts at zero, so training
/// begins from the static scene.
class DeformationField {
public:
    static constexpr std::size_t kPlaneFeatureDim = 16;
    static constexpr int kNumPlanes = 6;
    // Axis pairs into (x,y,z,t).
    static constexpr std::array<std::array<int, 2>, 6> kPlaneAxes = {
        {{0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 3}}};
    // Complementary plane pairs whose products fuse to the voxel feature.
    static constexpr std::array<std::array<int, 2>, 3> kFusionPairs = {{{0, 5}, {1, 4}, {2, 3}}};

    DeformationField() = default;

    DeformationField(const Vec3& aabb_min, const Vec3& aabb_max, Rng& rng,
                     std::vector<int> resolutions = {8, 16})
        : aabb_min_(aabb_min), aabb_max_(aabb_max), resolutions_(std::move(resolutions)) {
        static const char* plane_names[6] = {"xy", "xz", "yz", "xt", "yt", "zt"};
        for (std::size_t r = 0; r < resolutions_.size(); ++r) {
            const std::size_t verts = static_cast<std::size_t>(resolutions_[r]) + 1;
            for (int p = 0; p < kNumPlanes; ++p) {
                grids_.emplace_back(
                    "deform.grid.r" + std::to_string(r) + "." + plane_names[p],
                    Tensor::rand_uniform({verts, verts, kPlaneFeatureDim}, rng, 0.9, 1.1));
            }
        }
        const std::size_t latent = kPlaneFeatureDim * resolutions_.size();
        decoder_ = nets::Mlp("deform.decoder", {latent, 64, 64, 10}, rng, /*zero_last=*/true);
    }

    const std::vector<int>& resolutions() const { return resolutions_; }
    Vec3 aabb_min() const { return aabb_min_; }
    Vec3 aabb_max() const { return aabb_max_; }

    Parameter& grid(std::size_t res_index, int plane) {
        return grids_[res_index * kNumPlanes + static_cast<std::size_t>(plane)];
    }
    const Parameter& grid(std::size_t res_index, int plane) const {
        return grids_[res_index * kNumPlanes + static_cast<std::size_t>(plane)];
    }

    nets::Mlp& decoder() { return decoder_; }
    const nets::Mlp& decoder() const { return decoder_; }

    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> ps;
        for (auto& g : grids_) ps.push_back(&g);
        auto d = decoder_.parameters();
        ps.insert(ps.end(), d.begin(), d.end());
        return ps;
    }

    static void bilinear_weights(double fa, double fb, double w[4]) {
        w[0] = (1.0 - fa) * (1.0 - fb);
        w[1] = fa * (1.0 - fb);
        w[2] = (1.0 - fa) * fb;
        w[3] = fa * fb;
    }

    /// Interpolated voxel features {N, 16 * n_res} at canonical positions
    /// {N,3} and time t. Differentiable w.r.t. the grids and the positions
    /// (out-of-range queries clamp to the border, gradient 0 there).
    Var interpolate(Tape& t, Var positions, double time) {
        const Tensor& pos = t.value(positions);
        const std::size_t n = pos.dim(0);
        const std::size_t n_res = resolutions_.size();
        const std::size_t out_dim = kPlaneFeatureDim * n_res;

        std::vector<int> parents;
        parents.push_back(positions.id);
        std::vector<Var> grid_vars;
        for (auto& g : grids_) {
            Var gv = t.param(g);
            grid_vars.push_back(gv);
            parents.push_back(gv.id);
        }

        Tensor out({n, out_dim});
        forward_interp(t, pos, grid_vars, time, out);

        const DeformationField* self = this;
        return t.custom(std::move(out), std::move(parents), [self, n, time](Tape& tp, int id) {
            self->backward_interp(tp, id, n, time);
        });
    }

private:
    struct PlaneQuery {
        int i, j;       // lower vertex
        double fa, fb;  // fractions
        double da, db;  // d(cell coord)/d(world coord), 0 for t or clamped
        int axis_a, axis_b;
    };

    PlaneQuery plane_query(const double* p4, int plane, int res) const {
        const auto axes = kPlaneAxes[static_cast<std::size_t>(plane)];
        PlaneQuery q{};
        q.axis_a = axes[0];
        q.axis_b = axes[1];
        double ca, cb;
        axis_coord(p4, axes[0], res, ca, q.da);
        axis_coord(p4, axes[1], res, cb, q.db);
        q.i = static_cast<int>(std::floor(ca));
        if (q.i > res - 1) q.i = res - 1;
        if (q.i < 0) q.i = 0;
        q.j = static_cast<int>(std::floor(cb));
        if (q.j > res - 1) q.j = res - 1;
        if (q.j < 0) q.j = 0;
        q.fa = ca - q.i;
        q.fb = cb - q.j;
        return q;
    }

    void axis_coord(const double* p4, int axis, int res, double& coord, double& dcoord) const {
        double lo = 0.0, hi = 1.0;
        if (axis == 0) {
            lo = aabb_min_.x;
            hi = aabb_max_.x;
        } else if (axis == 1) {
            lo = aabb_min_.y;
            hi = aabb_max_.y;
        } else if (axis == 2) {
            lo = aabb_min_.z;
            hi = aabb_max_.z;
        }
        const double extent = hi - lo;
        double u = (p4[axis] - lo) / extent;
        dcoord = static_cast<double>(res) / extent;
        if (u <= 0.0) {
            u = 0.0;
            dcoord = 0.0;
        } else if (u >= 1.0) {
            u = 1.0;
            dcoord = 0.0;
        }
        if (axis == 3) dcoord = 0.0; // time is an input, not a parameter
        coord = u * res;
    }

    static void interp_plane(const Tensor& grid, const PlaneQuery& q, double* out16) {
        const std::size_t stride = grid.dim(1) * kPlaneFeatureDim;
        const double* base = grid.data();
        const double* g00 = base + q.i * stride + q.j * kPlaneFeatureDim;
        const double* g10 = g00 + stride;
        const double* g01 = g00 + kPlaneFeatureDim;
        const double* g11 = g10 + kPlaneFeatureDim;
        double w[4];
        bilinear_weights(q.fa, q.fb, w);
        for (std::size_t c = 0; c < kPlaneFeatureDim; ++c)
            out16[c] = w[0] * g00[c] + w[1] * g10[c] + w[2] * g01[c] + w[3] * g11[c];
    }

    void forward_interp(Tape& t, const Tensor& pos, const std::vector<Var>& grid_vars, double time,
                        Tensor& out) const {
        const std::size_t n = pos.dim(0);
        double vals[kNumPlanes][kPlaneFeatureDim];
        for (std::size_t g = 0; g < n; ++g) {
            const double p4[4] = {pos.at(g, 0), pos.at(g, 1), pos.at(g, 2), time};
            for (std::size_t r = 0; r < resolutions_.size(); ++r) {
                const int res = resolutions_[r];
                for (int pl = 0; pl < kNumPlanes; ++pl) {
                    const PlaneQuery q = plane_query(p4, pl, res);
                    interp_plane(t.value(grid_vars[r * kNumPlanes + pl]), q, vals[pl]);
                }
                double* o = out.data() + g * out.dim(1) + r * kPlaneFeatureDim;
                for (std::size_t c = 0; c < kPlaneFeatureDim; ++c) {
                    double acc = 0.0;
                    for (const auto& pair : kFusionPairs)
                        acc += vals[pair[0]][c] * vals[pair[1]][c];
                    o[c] = acc;
                }
            }
        }
    }

    void backward_interp(Tape& tp, int node_id, std::size_t n, double time) const {
        const auto& node = tp.node(node_id);
        const Tensor& gout = node.grad;
        const Tensor& pos = tp.node(node.parents[0]).value;
        Tensor& gpos = tp.grad_mut(node.parents[0]);

        double vals[kNumPlanes][kPlaneFeatureDim];
        PlaneQuery queries[kNumPlanes];
        for (std::size_t g = 0; g < n; ++g) {
            const double p4[4] = {pos.at(g, 0), pos.at(g, 1), pos.at(g, 2), time};
            for (std::size_t r = 0; r < resolutions_.size(); ++r) {
                const int res = resolutions_[r];
                for (int pl = 0; pl < kNumPlanes; ++pl) {
                    queries[pl] = plane_query(p4, pl, res);
                    interp_plane(tp.node(node.parents[1 + r * kNumPlanes + pl]).value, queries[pl],
                                 vals[pl]);
                }
                const double* go = gout.data() + g * gout.dim(1) + r * kPlaneFeatureDim;
                for (const auto& pair : kFusionPairs) {
                    // d(a*b) -> da = g*b, db = g*a, scattered per plane.
                    scatter_plane(tp, node.parents[1 + r * kNumPlanes + pair[0]], queries[pair[0]],
                                  go, vals[pair[1]], gpos, g);
                    scatter_plane(tp, node.parents[1 + r * kNumPlanes + pair[1]], queries[pair[1]],
                                  go, vals[pair[0]], gpos, g);
                }
            }
        }
    }

    void scatter_plane(Tape& tp, int grid_parent, const PlaneQuery& q, const double* gout16,
                       const double* other16, Tensor& gpos, std::size_t g) const {
        const Tensor& grid = tp.node(grid_parent).value;
        Tensor& ggrid = tp.grad_mut(grid_parent);
        const std::size_t stride = grid.dim(1) * kPlaneFeatureDim;
        const std::size_t base = q.i * stride + q.j * kPlaneFeatureDim;
        double w[4];
        bilinear_weights(q.fa, q.fb, w);
        const double* g00 = grid.data() + base;
        const double* g10 = g00 + stride;
        const double* g01 = g00 + kPlaneFeatureDim;
        const double* g11 = g10 + kPlaneFeatureDim;
        double dfa = 0.0, dfb = 0.0;
        for (std::size_t c = 0; c < kPlaneFeatureDim; ++c) {
            const double gv = gout16[c] * other16[c];
            ggrid[base + c] += w[0] * gv;
            ggrid[base + stride + c] += w[1] * gv;
            ggrid[base + kPlaneFeatureDim + c] += w[2] * gv;
            ggrid[base + stride + kPlaneFeatureDim + c] += w[3] * gv;
            dfa += gv * ((g10[c] - g00[c]) * (1.0 - q.fb) + (g11[c] - g01[c]) * q.fb);
            dfb += gv * ((g01[c] - g00[c]) * (1.0 - q.fa) + (g11[c] - g10[c]) * q.fa);
        }
        if (q.axis_a < 3 && q.da != 0.0) gpos.at(g, q.axis_a) += dfa * q.da;
        if (q.axis_b < 3 && q.db != 0.0) gpos.at(g, q.axis_b) += dfb * q.db;
    }

    Vec3 aabb_min_, aabb_max_;
    std::vector<int> resolutions_;
    std::vector<Parameter> grids_;
    nets::Mlp decoder_;
};

/// Time-deformed Gaussian set on the tape. Opacity and feature pass through
/// undeformed; rotation deltas are added then renormalized.
struct DeformedVars {
    Var centers;    // {N,3}
    Var log_scales; // {N,3}
    Var rotations;  // {N,4}, unit rows
    Var opacities;  // {N,1}, post-sigmoid
    Var features;   // {N,32}
};

inline DeformedVars deform(Tape& t, GaussianCloud& cloud, DeformationField& field, double time,
                           bool apply_field = true) {
    DeformedVars d;
    Var centers = t.param(cloud.centers);
    Var log_scales = t.param(cloud.log_scales);
    Var rotations = t.param(cloud.rotations);
    if (apply_field) {
        Var latent = field.interpolate(t, centers, time);
        Var deltas = field.decoder().forward(t, latent);
        d.centers = t.add(centers, t.slice_cols(deltas, 0, 3));
        d.log_scales = t.add(log_scales, t.slice_cols(deltas, 3, 6));
        d.rotations = t.normalize_rows(t.add(rotations, t.slice_cols(deltas, 6, 10)));
    } else {
        d.centers = centers;
        d.log_scales = log_scales;
        d.rotations = rotations;
    }
    d.opacities = t.sigmoid(t.param(cloud.opacity_logits));
    d.features = t.param(cloud.features);
    return d;
}

} // namespace g4ds::scene
