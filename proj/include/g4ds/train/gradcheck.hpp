#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "g4ds/core/conv.hpp"
#include "g4ds/core/tape.hpp"
#include "g4ds/nets/cspn.hpp"
#include "g4ds/nets/mlp.hpp"
#include "g4ds/nets/revnet.hpp"
#include "g4ds/nets/whiten.hpp"
#include "g4ds/render/render.hpp"
#include "g4ds/scene/deformation.hpp"
#include "g4ds/train/losses.hpp"

namespace g4ds::train {

struct FdReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::size_t checked = 0;
};

/// Central-difference comparison against tape gradients at 64-bit. `build`
/// reconstructs the graph from current parameter values and returns the
/// scalar loss Var; it is re-evaluated for every probe. Large parameters are
/// subsampled via `max_probes_per_param` (0 = every element). Relative error
/// uses a denominator floor so near-zero gradients compare absolutely.
inline FdReport fd_check(const std::vector<Parameter*>& params,
                         const std::function<Var(Tape&)>& build, double h = 1e-5,
                         std::size_t max_probes_per_param = 0, double denom_floor = 1e-6) {
    for (Parameter* p : params) p->zero_grad();
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);

    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad);

    FdReport rep;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter* p = params[pi];
        const std::size_t n = p->value.numel();
        std::size_t stride = 1;
        if (max_probes_per_param > 0 && n > max_probes_per_param)
            stride = (n + max_probes_per_param - 1) / max_probes_per_param;
        for (std::size_t i = 0; i < n; i += stride) {
            const double saved = p->value[i];
            p->value[i] = saved + h;
            Tape tp(false);
            const double fp = tp.value(build(tp)).item();
            p->value[i] = saved - h;
            Tape tm(false);
            const double fm = tm.value(build(tm)).item();
            p->value[i] = saved;

            const double fd = (fp - fm) / (2.0 * h);
            const double an = analytic[pi][i];
            const double abs_err = std::abs(fd - an);
            const double rel = abs_err / std::max({std::abs(fd), std::abs(an), denom_floor});
            rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
            rep.max_rel_err = std::max(rep.max_rel_err, rel);
            ++rep.checked;
        }
    }
    return rep;
}

struct GradCheckResult {
    std::string component;
    FdReport report;
    bool passed = false;
};

namespace detail {

inline void he_randomize(const std::vector<Parameter*>& params, Rng& rng) {
    for (Parameter* p : params) {
        const auto& s = p->value.shape();
        double fan_in = 1.0;
        if (s.size() >= 2) {
            fan_in = static_cast<double>(s[1]);
            for (std::size_t d = 2; d < s.size(); ++d) fan_in *= static_cast<double>(s[d]);
        }
        const double stddev = s.size() == 1 ? 0.05 : std::sqrt(2.0 / fan_in);
        p->value = Tensor::randn(p->value.shape(), rng, stddev);
    }
}

/// Gradient-check scene kept smooth everywhere: footprints cover the frame,
/// alphas stay strictly inside (1/255, 0.999) and transmittance never hits
/// the early-out floor, so central differences are valid.
inline scene::GaussianCloud smooth_cloud(std::size_t n, Rng& rng) {
    scene::GaussianCloud cloud(n);
    for (std::size_t i = 0; i < n; ++i) {
        cloud.centers.value.at(i, 0) = rng.uniform(-0.25, 0.25);
        cloud.centers.value.at(i, 1) = rng.uniform(-0.25, 0.25);
        cloud.centers.value.at(i, 2) = 2.0 + 0.4 * static_cast<double>(i);
        for (int c = 0; c < 3; ++c)
            cloud.log_scales.value.at(i, c) = std::log(0.5) + rng.uniform(-0.1, 0.1);
        Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
        axis = axis.normalized();
        const double ang = rng.uniform(0.0, 0.5);
        cloud.rotations.value.at(i, 0) = std::cos(ang);
        cloud.rotations.value.at(i, 1) = std::sin(ang) * axis.x;
        cloud.rotations.value.at(i, 2) = std::sin(ang) * axis.y;
        cloud.rotations.value.at(i, 3) = std::sin(ang) * axis.z;
        cloud.opacity_logits.value.at(i, 0) = rng.uniform(-0.5, 0.8);
        for (std::size_t c = 0; c < scene::kFeatureDim; ++c)
            cloud.features.value.at(i, c) = rng.uniform(-1.0, 1.0);
    }
    return cloud;
}

inline scene::Camera small_camera() {
    scene::Camera cam;
    cam.fx = cam.fy = 10.0;
    cam.cx = cam.cy = 4.0;
    cam.width = cam.height = 8;
    cam.rotation = Mat3::identity();
    cam.translation = Vec3{0, 0, 0};
    return cam;
}

} // namespace detail

/// Runs the named component's finite-difference suite `trials` times with
/// fresh random inputs. Component "all" runs everything. Every trainable
/// primitive plus the composed render-to-loss path is covered.
inline std::vector<GradCheckResult> grad_check(const std::string& component, int trials,
                                               std::ostream* log = nullptr) {
    using Builder = std::function<FdReport(Rng&)>;
    std::map<std::string, Builder> suites;

    suites["mlp"] = [](Rng& rng) {
        nets::Mlp mlp("m", {6, 12, 4}, rng, false);
        Parameter x("x", Tensor::randn({5, 6}, rng));
        std::vector<Parameter*> ps = {&x};
        auto mp = mlp.parameters();
        ps.insert(ps.end(), mp.begin(), mp.end());
        return fd_check(ps, [&](Tape& t) {
            Var y = mlp.forward(t, t.param(x));
            return t.mean(t.mul(y, y));
        });
    };

    suites["conv"] = [](Rng& rng) {
        Parameter x("x", Tensor::randn({2, 5, 5}, rng));
        Parameter w("w", Tensor::randn({3, 2, 3, 3}, rng, 0.4));
        Parameter b("b", Tensor::randn({3}, rng, 0.1));
        return fd_check({&x, &w, &b}, [&](Tape& t) {
            Var y = conv2d(t, t.param(x), t.param(w), t.param(b), 2, 1);
            return t.mean(t.mul(y, y));
        });
    };

    suites["coupling"] = [](Rng& rng) {
        nets::RevNet rev("rev", rng);
        detail::he_randomize(rev.parameters(), rng);
        Parameter z("z", Tensor::randn({32, 4, 4}, rng, 0.5));
        auto rp = rev.parameters();
        std::vector<Parameter*> ps = {&z, rp[0], rp[1], rp[rp.size() / 2], rp.back()};
        return fd_check(ps, [&](Tape& t) {
            Var out = rev.forward_feature(t, t.param(z));
            Var back = rev.inverse_feature(t, t.scale(out, 0.9));
            return t.mean(t.mul(back, back));
        }, 1e-5, 48);
    };

    suites["hexplane"] = [](Rng& rng) {
        scene::DeformationField field(Vec3{-2, -2, -2}, Vec3{2, 2, 2}, rng, {4, 8});
        scene::GaussianCloud cloud(3);
        for (std::size_t i = 0; i < 3; ++i)
            for (int c = 0; c < 3; ++c) cloud.centers.value.at(i, c) = rng.uniform(-1.5, 1.5);
        Tensor w = Tensor::randn({3, 32}, rng);
        std::vector<Parameter*> ps = {&cloud.centers, &field.grid(0, 0), &field.grid(0, 5),
                                      &field.grid(1, 2), &field.decoder().weight(0)};
        return fd_check(ps, [&](Tape& t) {
            Var latent = field.interpolate(t, t.param(cloud.centers), 0.41);
            Var deltas = field.decoder().forward(t, latent);
            Var probe = t.mean(t.mul(latent, t.constant(w)));
            return t.add(probe, t.mean(t.mul(deltas, deltas)));
        }, 1e-5, 150);
    };

    suites["project"] = [](Rng& rng) {
        scene::GaussianCloud cloud = detail::smooth_cloud(4, rng);
        scene::Camera cam = detail::small_camera();
        Tensor w = Tensor::randn({4, 6}, rng);
        w.at(0, 5) = 0.3; // exercise the depth column too
        return fd_check({&cloud.centers, &cloud.log_scales, &cloud.rotations}, [&](Tape& t) {
            std::shared_ptr<render::SplatBounds> bounds;
            Var packed = render::project_gaussians(t, t.param(cloud.centers),
                                                   t.param(cloud.log_scales),
                                                   t.param(cloud.rotations), cam, bounds);
            return t.mean(t.mul(packed, t.constant(w)));
        });
    };

    suites["composite"] = [](Rng& rng) {
        scene::GaussianCloud cloud = detail::smooth_cloud(3, rng);
        scene::Camera cam = detail::small_camera();
        Tensor target = Tensor::randn({8, 8, scene::kFeatureDim}, rng, 0.5);
        return fd_check({&cloud.centers, &cloud.log_scales, &cloud.rotations,
                         &cloud.opacity_logits, &cloud.features},
                        [&](Tape& t) {
                            std::shared_ptr<render::SplatBounds> bounds;
                            Var packed = render::project_gaussians(
                                t, t.param(cloud.centers), t.param(cloud.log_scales),
                                t.param(cloud.rotations), cam, bounds);
                            Var sig = t.sigmoid(t.param(cloud.opacity_logits));
                            Var e = render::composite(t, packed, sig, t.param(cloud.features),
                                                      bounds, cam.width, cam.height);
                            return t.mse(e, t.constant(target));
                        },
                        1e-5, 60);
    };

    suites["cspn"] = [](Rng& rng) {
        nets::Cspn cspn("cspn", rng);
        detail::he_randomize(cspn.parameters(), rng);
        Parameter img("img", Tensor::randn({3, 5, 5}, rng, 0.5));
        Parameter guide("guide", Tensor::randn({3, 5, 5}, rng, 0.5));
        std::vector<Parameter*> ps = {&img, &guide};
        auto cp = cspn.parameters();
        ps.insert(ps.end(), cp.begin(), cp.end());
        return fd_check(ps, [&](Tape& t) {
            Var out = cspn.propagate(t, t.param(img), t.param(guide), 2);
            return t.mean(t.mul(out, out));
        }, 1e-5, 40);
    };

    suites["whiten"] = [](Rng& rng) {
        Parameter img("img", Tensor::randn({3, 6, 6}, rng, 0.5));
        Tensor w = Tensor::randn({3, 6, 6}, rng);
        return fd_check({&img}, [&](Tape& t) {
            Var out = nets::whiten(t, t.param(img));
            return t.mean(t.mul(out, t.constant(w)));
        });
    };

    suites["render"] = [](Rng& rng) {
        scene::GaussianCloud cloud = detail::smooth_cloud(6, rng);
        scene::DeformationField field(Vec3{-2, -2, -2}, Vec3{2, 2, 2}, rng, {4, 8});
        render::RenderHeads heads(rng);
        nets::RevNet revnet("rev", rng);
        scene::Camera cam = detail::small_camera();
        Tensor gt = Tensor::rand_uniform({8, 8, 3}, rng, 0.0, 1.0);
        std::vector<Parameter*> ps = {&cloud.centers,
                                      &cloud.log_scales,
                                      &cloud.rotations,
                                      &cloud.opacity_logits,
                                      &cloud.features,
                                      &field.grid(0, 1),
                                      &field.grid(1, 3),
                                      &field.decoder().weight(0),
                                      &heads.psi_c.weight(0),
                                      &heads.psi_f.weight(1),
                                      revnet.block(0).parameters()[0]};
        return fd_check(ps, [&](Tape& t) {
            render::RenderResult r =
                render::render_scene(t, cloud, field, heads, cam, 0.4);
            EmbedLoss l = loss_embed(t, r, gt, revnet, 1.0, 1.0);
            return l.total;
        }, 1e-5, 40);
    };

    std::vector<std::string> names;
    if (component == "all") {
        for (const auto& [name, fn] : suites) names.push_back(name);
    } else {
        if (!suites.count(component))
            throw std::invalid_argument("grad_check: unknown component '" + component + "'");
        names.push_back(component);
    }

    std::vector<GradCheckResult> results;
    for (const auto& name : names) {
        GradCheckResult r;
        r.component = name;
        for (int trial = 0; trial < trials; ++trial) {
            Rng rng(0xC0FFEEull + 7919ull * static_cast<std::uint64_t>(trial));
            FdReport rep = suites[name](rng);
            r.report.max_rel_err = std::max(r.report.max_rel_err, rep.max_rel_err);
            r.report.max_abs_err = std::max(r.report.max_abs_err, rep.max_abs_err);
            r.report.checked += rep.checked;
        }
        r.passed = r.report.max_rel_err < 1e-4;
        if (log)
            *log << "gradcheck " << name << ": max rel err " << r.report.max_rel_err << " over "
                 << r.report.checked << " probes -> " << (r.passed ? "ok" : "FAIL") << "\n";
        results.push_back(r);
    }
    return results;
}

} // namespace g4ds::train
