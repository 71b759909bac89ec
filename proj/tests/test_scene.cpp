#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "g4ds/scene/deformation.hpp"
#include "g4ds/scene/generate.hpp"
#include "fd_check.hpp"
#include "test_util.hpp"

using namespace g4ds;
using namespace g4ds::scene;

TEST(Deform, IdentityWithZeroField) {
    Rng rng(70);
    GaussianCloud cloud(5);
    for (std::size_t i = 0; i < 5; ++i) {
        cloud.centers.value.at(i, 0) = rng.uniform(-2, 2);
        cloud.centers.value.at(i, 1) = rng.uniform(-2, 2);
        cloud.centers.value.at(i, 2) = rng.uniform(-2, 2);
        cloud.log_scales.value.at(i, 0) = -1.0;
        // Exactly representable unit quaternion.
        cloud.rotations.value.at(i, 0) = 0.0;
        cloud.rotations.value.at(i, 1) = 1.0;
    }
    DeformationField field(Vec3{-3, -3, -3}, Vec3{3, 3, 3}, rng);
    // Zero the plane grids; the decoder final layer is zero by construction.
    for (std::size_t r = 0; r < 2; ++r)
        for (int p = 0; p < 6; ++p) field.grid(r, p).value.fill(0.0);

    for (double t : {0.0, 0.31, 1.0}) {
        Tape tape(false);
        DeformedVars d = deform(tape, cloud, field, t);
        EXPECT_EQ(tape.value(d.centers).max_abs_diff(cloud.centers.value), 0.0);
        EXPECT_EQ(tape.value(d.log_scales).max_abs_diff(cloud.log_scales.value), 0.0);
        EXPECT_EQ(tape.value(d.rotations).max_abs_diff(cloud.rotations.value), 0.0);
        EXPECT_EQ(tape.value(d.features).max_abs_diff(cloud.features.value), 0.0);
    }
}

TEST(Deform, ZeroGridsGiveConstantDeltas) {
    Rng rng(71);
    DeformationField field(Vec3{-3, -3, -3}, Vec3{3, 3, 3}, rng);
    for (std::size_t r = 0; r < 2; ++r)
        for (int p = 0; p < 6; ++p) field.grid(r, p).value.fill(0.0);
    // Give the decoder a nonzero final layer so its zero-input output is visible.
    auto& last_w = field.decoder().weight(2);
    last_w.value = Tensor::randn(last_w.value.shape(), rng, 0.2);
    auto& last_b = field.decoder().bias(2);
    last_b.value = Tensor::randn(last_b.value.shape(), rng, 0.2);

    GaussianCloud cloud(4);
    for (std::size_t i = 0; i < 4; ++i) {
        cloud.centers.value.at(i, 0) = rng.uniform(-2, 2);
        cloud.centers.value.at(i, 2) = rng.uniform(-2, 2);
    }
    Tape tape(false);
    Var latent = field.interpolate(tape, tape.param(cloud.centers), 0.3);
    EXPECT_EQ(tape.value(latent).max_abs(), 0.0);

    DeformedVars a = deform(tape, cloud, field, 0.1);
    DeformedVars b = deform(tape, cloud, field, 0.9);
    // Deltas equal across time and space: difference of deformed centers
    // equals difference of canonical centers.
    Tensor da = tape.value(a.centers);
    Tensor db = tape.value(b.centers);
    EXPECT_EQ(da.max_abs_diff(db), 0.0);
    const double delta0 = da.at(0, 0) - cloud.centers.value.at(0, 0);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(da.at(i, 0) - cloud.centers.value.at(i, 0), delta0);
}

TEST(Deform, RandomFieldVariesAcrossTime) {
    Rng rng(72);
    DeformationField field(Vec3{-3, -3, -3}, Vec3{3, 3, 3}, rng);
    g4ds::testing::randomize(field.decoder().parameters(), rng, 0.2);
    GaussianCloud cloud(4);
    for (std::size_t i = 0; i < 4; ++i) cloud.centers.value.at(i, 0) = 0.5 * i;
    Tape tape(false);
    DeformedVars a = deform(tape, cloud, field, 0.2);
    DeformedVars b = deform(tape, cloud, field, 0.8);
    EXPECT_GT(tape.value(a.centers).max_abs_diff(tape.value(b.centers)), 1e-9);
}

TEST(Deform, BilinearPartitionOfUnity) {
    Rng rng(73);
    for (int i = 0; i < 1000; ++i) {
        double w[4];
        DeformationField::bilinear_weights(rng.uniform(), rng.uniform(), w);
        EXPECT_NEAR(w[0] + w[1] + w[2] + w[3], 1.0, 1e-12);
    }
}

TEST(Deform, HexplaneGradients) {
    Rng rng(74);
    DeformationField field(Vec3{-2, -2, -2}, Vec3{2, 2, 2}, rng, {4, 8});
    GaussianCloud cloud(3);
    Rng prng(75);
    for (std::size_t i = 0; i < 3; ++i)
        for (int c = 0; c < 3; ++c) cloud.centers.value.at(i, c) = prng.uniform(-1.5, 1.5);
    Tensor w = Tensor::randn({3, 32}, prng);
    std::vector<Parameter*> checked = {&cloud.centers, &field.grid(0, 0), &field.grid(0, 5),
                                       &field.grid(1, 2), &field.grid(1, 3)};
    auto rep = g4ds::testing::fd_check(checked, [&](Tape& t) {
        Var latent = field.interpolate(t, t.param(cloud.centers), 0.37);
        return t.mean(t.mul(latent, t.constant(w)));
    }, 1e-5, 200);
    EXPECT_LT(rep.max_rel_err, 1e-5);
}

TEST(Generate, DeterministicForFixedSeed) {
    SceneSpec spec;
    spec.resolution = 24;
    spec.gaussians = 128;
    spec.cameras = 3;
    spec.timesteps = 3;
    SceneBundle a = generate_scene(spec, 7);
    SceneBundle b = generate_scene(spec, 7);
    EXPECT_EQ(a.gaussians.centers.value.max_abs_diff(b.gaussians.centers.value), 0.0);
    EXPECT_EQ(a.gaussians.features.value.max_abs_diff(b.gaussians.features.value), 0.0);
    ASSERT_EQ(a.ground_truth.size(), b.ground_truth.size());
    for (std::size_t i = 0; i < a.ground_truth.size(); ++i)
        EXPECT_EQ(a.ground_truth[i].max_abs_diff(b.ground_truth[i]), 0.0);
    SceneBundle c = generate_scene(spec, 8);
    EXPECT_GT(a.gaussians.centers.value.max_abs_diff(c.gaussians.centers.value), 0.0);
}

TEST(Generate, RejectsBadResolution) {
    SceneSpec spec;
    spec.resolution = 8;
    EXPECT_THROW(generate_scene(spec, 1), std::invalid_argument);
    spec.resolution = 600;
    EXPECT_THROW(generate_scene(spec, 1), std::invalid_argument);
}

TEST(Generate, ZeroMotionScaleIsStatic) {
    SceneSpec spec;
    spec.resolution = 20;
    spec.gaussians = 128;
    spec.cameras = 2;
    spec.timesteps = 4;
    spec.motion_scale = 0.0;
    SceneBundle b = generate_scene(spec, 3);
    for (int cam = 0; cam < 2; ++cam)
        for (int t = 1; t < 4; ++t)
            EXPECT_EQ(b.gt(cam, t).max_abs_diff(b.gt(cam, 0)), 0.0);
}

TEST(FlowOracle, IdentityViewIsZeroFlow) {
    SceneSpec spec;
    spec.resolution = 20;
    spec.gaussians = 128;
    spec.cameras = 3;
    spec.timesteps = 3;
    SceneBundle b = generate_scene(spec, 11);
    auto flow = flow_oracle(b, 1, 1, 1, 1);
    EXPECT_EQ(flow.valid_fraction(), 1.0);
    for (std::size_t i = 0; i < flow.dx.size(); ++i) {
        EXPECT_EQ(flow.dx[i], 0.0);
        EXPECT_EQ(flow.dy[i], 0.0);
    }
}

TEST(FlowOracle, PinholeStereoDisparity) {
    // Two cameras with identity rotation, pure horizontal translation:
    // flow_x = -fx * baseline / depth per the pinhole formula, flow_y = 0.
    SceneBundle b;
    b.spec.timesteps = 1;
    b.timestamps = {0.0};
    b.oracle.motion = MotionModel::Linear;
    b.oracle.background_radius = 20.0;
    SpherePrimitive sp;
    sp.base_center = Vec3{0, 0, 0};
    sp.radius = 0.8;
    b.oracle.spheres.push_back(sp);

    const double baseline = 0.4;
    for (int i = 0; i < 2; ++i) {
        Camera cam;
        cam.fx = cam.fy = 40.0;
        cam.cx = cam.cy = 16.0;
        cam.width = cam.height = 32;
        cam.rotation = Mat3::identity();
        const Vec3 eye{i * baseline, 0.0, -5.0};
        cam.translation = cam.rotation * (eye * -1.0);
        b.cameras.push_back(cam);
    }
    auto flow = flow_oracle(b, 0, 0, 1, 0);
    EXPECT_GT(flow.valid_fraction(), 0.8);
    Vec3 origin, dir;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const std::size_t i = flow.index(x, y);
            if (!flow.mask[i]) continue;
            b.cameras[0].pixel_ray(x + 0.5, y + 0.5, origin, dir);
            const OracleHit hit = b.oracle.raycast(origin, dir, 0.0);
            const double depth = b.cameras[0].to_camera(hit.point).z;
            EXPECT_NEAR(flow.dx[i], -40.0 * baseline / depth, 1e-9);
            EXPECT_NEAR(flow.dy[i], 0.0, 1e-9);
        }
}

TEST(FlowOracle, ObjectFlowMatchesAnalyticProjection) {
    SceneSpec spec;
    spec.resolution = 64;
    spec.gaussians = 128;
    spec.cameras = 4;
    spec.timesteps = 5;
    SceneBundle b = generate_scene(spec, 13);
    const auto& sp = b.oracle.spheres[0];
    const Camera& cam = b.cameras[0];
    const double t1 = b.timestamps[1], t2 = b.timestamps[2];

    // Tangent point of the center ray, moved analytically.
    const Vec3 eye = cam.rotation.tmul(cam.translation * -1.0);
    const Vec3 c1 = sp.center_at(t1, b.oracle.motion);
    const Vec3 to_center = (c1 - eye).normalized();
    const Vec3 p_tangent = c1 - to_center * sp.radius;
    const Vec3 delta = sp.center_at(t2, b.oracle.motion) - c1;
    const Vec2 proj1 = cam.project(p_tangent);
    const Vec2 proj2 = cam.project(p_tangent + delta);

    auto flow = flow_oracle(b, 0, 1, 0, 2);
    const int px = static_cast<int>(proj1.x);
    const int py = static_cast<int>(proj1.y);
    ASSERT_TRUE(flow.mask[flow.index(px, py)]);
    EXPECT_NEAR(flow.dx[flow.index(px, py)], proj2.x - proj1.x, 0.1);
    EXPECT_NEAR(flow.dy[flow.index(px, py)], proj2.y - proj1.y, 0.1);
}

TEST(FlowOracle, RoundTripReturnsWithinHalfPixel) {
    SceneSpec spec;
    spec.resolution = 64;
    spec.gaussians = 128;
    spec.cameras = 6;
    spec.timesteps = 3;
    SceneBundle b = generate_scene(spec, 17);
    auto fab = flow_oracle(b, 0, 1, 1, 2);
    auto fba = flow_oracle(b, 1, 2, 0, 1);
    const int W = 64;

    int checked = 0;
    for (int y = 0; y < W; ++y)
        for (int x = 0; x < W; ++x) {
            const std::size_t i = fab.index(x, y);
            if (!fab.mask[i]) continue;
            const double qx = x + 0.5 + fab.dx[i];
            const double qy = y + 0.5 + fab.dy[i];
            // Bilinear sample of the reverse flow at q.
            const int rx = static_cast<int>(std::floor(qx - 0.5));
            const int ry = static_cast<int>(std::floor(qy - 0.5));
            if (rx < 0 || rx + 1 >= W || ry < 0 || ry + 1 >= W) continue;
            const std::size_t c00 = fba.index(rx, ry), c10 = fba.index(rx + 1, ry);
            const std::size_t c01 = fba.index(rx, ry + 1), c11 = fba.index(rx + 1, ry + 1);
            if (!(fba.mask[c00] && fba.mask[c10] && fba.mask[c01] && fba.mask[c11])) continue;
            // Skip flow discontinuities (occlusion silhouettes): the round
            // trip is only defined where the reverse map is continuous.
            const double spread =
                std::max({std::abs(fba.dx[c00] - fba.dx[c11]), std::abs(fba.dy[c00] - fba.dy[c11]),
                          std::abs(fba.dx[c10] - fba.dx[c01]), std::abs(fba.dy[c10] - fba.dy[c01])});
            if (spread > 1.0) continue;
            const double fx = qx - 0.5 - rx, fy = qy - 0.5 - ry;
            const double bdx = (1 - fx) * (1 - fy) * fba.dx[c00] + fx * (1 - fy) * fba.dx[c10] +
                               (1 - fx) * fy * fba.dx[c01] + fx * fy * fba.dx[c11];
            const double bdy = (1 - fx) * (1 - fy) * fba.dy[c00] + fx * (1 - fy) * fba.dy[c10] +
                               (1 - fx) * fy * fba.dy[c01] + fx * fy * fba.dy[c11];
            const double err = std::hypot(qx + bdx - (x + 0.5), qy + bdy - (y + 0.5));
            EXPECT_LT(err, 0.5) << "pixel " << x << "," << y;
            ++checked;
        }
    EXPECT_GT(checked, 800);
}

TEST(FlowOracle, RejectsOutOfRangeViews) {
    SceneSpec spec;
    spec.resolution = 16;
    spec.gaussians = 64;
    spec.cameras = 2;
    spec.timesteps = 2;
    SceneBundle b = generate_scene(spec, 19);
    EXPECT_THROW(flow_oracle(b, 0, 0, 5, 0), std::invalid_argument);
    EXPECT_THROW(flow_oracle(b, 0, 3, 1, 0), std::invalid_argument);
}
