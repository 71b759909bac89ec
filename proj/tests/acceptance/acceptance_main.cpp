// Acceptance suite: one pass/fail line per criterion. Criteria run in a
// cost-aware order (cheap checks first, then the end-to-end training runs)
// but the summary prints in criterion order. Exit code 0 iff all selected
// criteria pass.
//
// Usage: acceptance [--only 1,2,5] [--artifacts DIR]

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "g4ds/io/ppm.hpp"
#include "g4ds/io/run_config.hpp"
#include "g4ds/metrics/protocol.hpp"
#include "g4ds/pipeline/stylize.hpp"
#include "g4ds/scene/scene_io.hpp"
#include "g4ds/train/gradcheck.hpp"
#include "g4ds/train/stage1.hpp"
#include "g4ds/train/stage2.hpp"

namespace fs = std::filesystem;
using namespace g4ds;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

double elapsed(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << v;
    return ss.str();
}

void randomize_he(const std::vector<Parameter*>& params, Rng& rng) {
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

/// Procedurally generated style image (smooth color waves), 256x256.
Tensor make_style_image(std::uint64_t seed) {
    Rng rng(seed);
    Tensor img({256, 256, 3});
    double fx[3], fy[3], fd[3], ph[3], base[3], amp[3];
    for (int c = 0; c < 3; ++c) {
        fx[c] = rng.uniform(0.02, 0.12);
        fy[c] = rng.uniform(0.02, 0.12);
        fd[c] = rng.uniform(0.0, 0.05);
        ph[c] = rng.uniform(0.0, 6.28);
        base[c] = rng.uniform(0.35, 0.65);
        amp[c] = rng.uniform(0.2, 0.34);
    }
    for (std::size_t y = 0; y < 256; ++y)
        for (std::size_t x = 0; x < 256; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                img.at(y, x, c) = base[c] + amp[c] * std::sin(fx[c] * x + fy[c] * y +
                                                              fd[c] * x * y / 256.0 + ph[c]);
    return img;
}

/// Correlated full-rank samples: a random mixing matrix plus independent
/// per-dimension jitter that keeps the covariance comfortably above the
/// eigenvalue floor.
Tensor random_samples(std::size_t n, Rng& rng) {
    Tensor mix = Tensor::randn({32, 32}, rng, 0.25);
    for (std::size_t i = 0; i < 32; ++i) mix.at(i, i) += 1.0;
    Tensor z = Tensor::randn({n, 32}, rng);
    Tensor out({n, 32});
    mm(z, false, mix, false, out, false);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 32; ++c)
            out.at(i, c) += 0.1 * rng.normal() + 0.2 * std::sin(0.7 * c);
    return out;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// --- criterion 1: reversible round trip -----------------------------------

Outcome criterion1() {
    const auto t0 = Clock::now();
    Rng seed_rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(seed_rng.next_u64());
        nets::RevNet rev("rev", rng);
        randomize_he(rev.parameters(), rng);
        Tensor z = Tensor::randn({32, 16, 16}, rng);
        Tape t(false);
        Var back = rev.inverse_feature(t, rev.forward_feature(t, t.constant(z)));
        worst = std::max(worst, t.value(back).max_abs_diff(z));
    }
    // Image round trip.
    Rng rng(0xABCD);
    nets::RevNet rev("rev", rng);
    randomize_he(rev.parameters(), rng);
    Tensor img = Tensor::rand_uniform({3, 16, 16}, rng, 0.0, 1.0);
    Tape t(false);
    Var back = rev.inverse_image(t, rev.forward_image(t, t.constant(img)));
    const double img_err = t.value(back).max_abs_diff(img);
    worst = std::max(worst, img_err);

    Outcome o;
    o.seconds = elapsed(t0);
    o.pass = worst < 1e-10 && o.seconds < 10.0;
    o.detail = "max round-trip error " + fmt(worst, 3) + " (gate 1e-10), " + fmt(o.seconds, 3) + " s";
    return o;
}

// --- criterion 2: rasterizer oracle equivalence ---------------------------

Outcome criterion2() {
    const auto t0 = Clock::now();
    double worst = -1.0;
    Rng seed_rng(202);
    for (int trial = 0; trial < 50; ++trial) {
        Rng rng(seed_rng.next_u64());
        const std::size_t n = 200 + rng.uniform_index(801); // up to 1000
        scene::GaussianCloud cloud(n);
        for (std::size_t i = 0; i < n; ++i) {
            cloud.centers.value.at(i, 0) = rng.uniform(-2.5, 2.5);
            cloud.centers.value.at(i, 1) = rng.uniform(-2.5, 2.5);
            cloud.centers.value.at(i, 2) = rng.uniform(0.5, 8.0);
            for (int c = 0; c < 3; ++c)
                cloud.log_scales.value.at(i, c) = std::log(rng.uniform(0.02, 0.4));
            Vec3 ax{rng.normal(), rng.normal(), rng.normal()};
            ax = ax.normalized();
            const double ang = rng.uniform(0.0, 3.1);
            cloud.rotations.value.at(i, 0) = std::cos(ang);
            cloud.rotations.value.at(i, 1) = std::sin(ang) * ax.x;
            cloud.rotations.value.at(i, 2) = std::sin(ang) * ax.y;
            cloud.rotations.value.at(i, 3) = std::sin(ang) * ax.z;
            cloud.opacity_logits.value.at(i, 0) = rng.uniform(-2.5, 3.5);
            for (std::size_t c = 0; c < scene::kFeatureDim; ++c)
                cloud.features.value.at(i, c) = rng.normal();
        }
        scene::Camera cam;
        cam.fx = cam.fy = 64.0;
        cam.cx = cam.cy = 32.0;
        cam.width = cam.height = 64;
        cam.rotation = Mat3::identity();
        cam.translation = Vec3{0, 0, 0};

        Tape t(false);
        std::shared_ptr<render::SplatBounds> bounds;
        Var packed = render::project_gaussians(t, t.constant(cloud.centers.value),
                                               t.constant(cloud.log_scales.value),
                                               t.constant(cloud.rotations.value), cam, bounds);
        Var sig = t.sigmoid(t.constant(cloud.opacity_logits.value));
        Var feats = t.constant(cloud.features.value);
        Tensor alpha_n, alpha_t;
        Var naive = render::composite(t, packed, sig, feats, bounds, 64, 64,
                                      render::RasterMode::Naive, &alpha_n);
        Var tiled = render::composite(t, packed, sig, feats, bounds, 64, 64,
                                      render::RasterMode::Tiled, &alpha_t);
        worst = std::max(worst, t.value(naive).max_abs_diff(t.value(tiled)));
        worst = std::max(worst, alpha_n.max_abs_diff(alpha_t));
    }
    Outcome o;
    o.seconds = elapsed(t0);
    o.pass = worst == 0.0 && o.seconds < 60.0;
    o.detail = "max |tiled - naive| = " + fmt(worst, 3) + " over 50 scenes, " + fmt(o.seconds, 3) + " s";
    return o;
}

// --- criterion 3: gradient suite -------------------------------------------

Outcome criterion3() {
    const auto t0 = Clock::now();
    auto results = train::grad_check("all", 3);
    double worst = 0.0;
    bool pass = true;
    std::string failing;
    for (const auto& r : results) {
        worst = std::max(worst, r.report.max_rel_err);
        if (!r.passed) {
            pass = false;
            failing += " " + r.component;
        }
    }
    Outcome o;
    o.seconds = elapsed(t0);
    o.pass = pass && o.seconds < 120.0;
    o.detail = "max rel err " + fmt(worst, 3) + " across " + std::to_string(results.size()) +
               " components" + (failing.empty() ? "" : " (failing:" + failing + ")") + ", " +
               fmt(o.seconds, 3) + " s";
    return o;
}

// --- criterion 4: closed-form covariance matching ---------------------------

Outcome criterion4() {
    const auto t0 = Clock::now();
    Rng seed_rng(404);
    double worst_match = 0.0, worst_white = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(seed_rng.next_u64());
        Tensor fc = random_samples(120, rng);
        Tensor fs = random_samples(140, rng);
        wct::StyleTransform tr = wct::closed_form_transform(fc, fs);
        Tensor transformed = wct::apply_transform(fc, tr);
        Tensor cov_t = wct::covariance(transformed);
        Tensor cov_s = wct::covariance(fs, tr.style_mean);
        worst_match = std::max(worst_match, cov_t.max_abs_diff(cov_s));

        wct::StyleTransform white = tr;
        white.coloring = Tensor({32, 32});
        for (std::size_t i = 0; i < 32; ++i) white.coloring.at(i, i) = 1.0;
        white.style_mean = Tensor({32});
        Tensor whitened = wct::apply_transform(fc, white);
        Tensor cov_w = wct::covariance(whitened);
        for (std::size_t i = 0; i < 32; ++i) cov_w.at(i, i) -= 1.0;
        worst_white = std::max(worst_white, cov_w.max_abs());
    }
    Outcome o;
    o.seconds = elapsed(t0);
    o.pass = worst_match < 1e-6 && worst_white < 1e-6 && o.seconds < 10.0;
    o.detail = "covariance match " + fmt(worst_match, 3) + ", whitening identity " +
               fmt(worst_white, 3) + " (gates 1e-6), " + fmt(o.seconds, 3) + " s";
    return o;
}

// --- criterion 5: predictor quality -----------------------------------------

Outcome criterion5() {
    const auto t0 = Clock::now();
    Rng rng(505);
    nets::TransformPredictor mlp_c("mlp_c", rng);
    nets::TransformPredictor mlp_s("mlp_s", rng);

    auto pair_loss = [&](Tape& t, const Tensor& fc, const Tensor& fs, bool identity) {
        Var vfc = t.constant(fc);
        Var vfs = t.constant(fs);
        Var combined;
        if (identity) {
            Tensor eye({32, 32});
            for (std::size_t i = 0; i < 32; ++i) eye.at(i, i) = 1.0;
            combined = t.constant(eye);
        } else {
            combined = t.matmul(mlp_s.forward(t, vfs), mlp_c.forward(t, vfc));
        }
        Var fc_centered = t.sub_rowvec(vfc, t.mean_rows(vfc));
        Var fs_centered = t.sub_rowvec(vfs, t.mean_rows(vfs));
        Var fcs = t.matmul_nt(fc_centered, combined);
        return wct::covariance_loss(t, fcs, fs_centered);
    };

    train::Adam opt;
    std::vector<Parameter*> params = mlp_c.parameters();
    for (auto* p : mlp_s.parameters()) params.push_back(p);
    opt.add_group(params, 1e-3);
    opt.set_total_steps(1500);
    Rng data_rng(506);
    for (int step = 0; step < 1500; ++step) {
        Tensor fc = random_samples(96, data_rng);
        Tensor fs = random_samples(96, data_rng);
        opt.zero_grad();
        Tape t;
        Var loss = pair_loss(t, fc, fs, false);
        t.backward(loss);
        opt.step();
    }

    // Held-out evaluation.
    Rng eval_rng(507);
    double pred = 0.0, baseline = 0.0, closed = 0.0;
    const int held = 20;
    for (int i = 0; i < held; ++i) {
        Tensor fc = random_samples(96, eval_rng);
        Tensor fs = random_samples(96, eval_rng);
        Tape t(false);
        pred += t.value(pair_loss(t, fc, fs, false)).item();
        baseline += t.value(pair_loss(t, fc, fs, true)).item();
        // Closed-form optimum on the same pair.
        wct::StyleTransform tr = wct::closed_form_transform(fc, fs);
        Tensor tc = wct::apply_transform(fc, tr);
        Tensor mu_t = wct::sample_mean(tc);
        Tensor centered_t({96, 32}), centered_s({96, 32});
        const Tensor mu_s = wct::sample_mean(fs);
        for (std::size_t r = 0; r < 96; ++r)
            for (std::size_t c = 0; c < 32; ++c) {
                centered_t.at(r, c) = tc.at(r, c) - mu_t[c];
                centered_s.at(r, c) = fs.at(r, c) - mu_s[c];
            }
        closed += wct::covariance_gap(centered_t, centered_s);
    }
    pred /= held;
    baseline /= held;
    closed /= held;

    Outcome o;
    o.seconds = elapsed(t0);
    o.pass = pred < 0.1 * baseline && pred >= closed - 1e-12 && o.seconds < 600.0;
    o.detail = "held-out loss " + fmt(pred, 4) + " vs identity baseline " + fmt(baseline, 4) +
               " (need <10%) and closed-form floor " + fmt(closed, 3) + ", " + fmt(o.seconds, 3) +
               " s";
    return o;
}

// --- criterion 8: interpolation linearity -----------------------------------

Outcome criterion8() {
    const auto t0 = Clock::now();
    scene::SceneSpec spec;
    spec.resolution = 32;
    spec.gaussians = 300;
    spec.cameras = 3;
    spec.timesteps = 2;
    train::Model m = train::Model::create(scene::generate_scene(spec, 808), 808);
    Rng rng(809);
    // Arbitrary (non-identity) predictor weights.
    for (Parameter* p : m.stage2_parameters())
        for (std::size_t i = 0; i < p->value.numel(); ++i) p->value[i] += 0.01 * rng.normal();

    pipeline::StyleContext sa = pipeline::prepare_style(m, make_style_image(21));
    pipeline::StyleContext sb = pipeline::prepare_style(m, make_style_image(22));
    wct::StyleTransform ta = pipeline::predict_style_transform(m, sa);
    wct::StyleTransform tb = pipeline::predict_style_transform(m, sb);

    Tape t(false);
    render::RenderResult r = render::render_scene(t, m.scene.gaussians, m.scene.deformation,
                                                  m.heads, m.scene.cameras[0], 0.5);
    const Tensor f = t.value(r.feature);

    const Tensor out_a = wct::apply_transform(f, ta);
    const Tensor out_b = wct::apply_transform(f, tb);

    // Endpoints reproduce single-style outputs exactly.
    wct::StyleTransform end_a = wct::interpolate_styles({{ta, 1.0}, {tb, 0.0}});
    const double end_err = wct::apply_transform(f, end_a).max_abs_diff(out_a);

    // Blend equals the pixel blend.
    wct::StyleTransform half = wct::interpolate_styles({{ta, 0.5}, {tb, 0.5}});
    const Tensor out_half = wct::apply_transform(f, half);
    double blend_err = 0.0;
    for (std::size_t i = 0; i < f.numel(); ++i)
        blend_err = std::max(blend_err, std::abs(out_half[i] - (0.5 * out_a[i] + 0.5 * out_b[i])));

    Outcome o;
    o.seconds = elapsed(t0);
    o.pass = end_err == 0.0 && blend_err < 1e-12 && o.seconds < 60.0;
    o.detail = "endpoint err " + fmt(end_err, 3) + ", blend err " + fmt(blend_err, 3) +
               " (gate 1e-12), " + fmt(o.seconds, 3) + " s";
    return o;
}

// --- shared end-to-end state -------------------------------------------------

struct Pipeline {
    fs::path dir;
    train::Model model; // after stage 1 (then stage 2)
    bool stage1_done = false;
    bool stage2_done = false;
};

// --- criterion 6: stage-1 reconstruction -------------------------------------

Outcome criterion6(Pipeline& p) {
    const auto t0 = Clock::now();
    std::cerr << "[criterion 6] generating reference scene...\n";
    scene::SceneBundle bundle = scene::generate_scene(scene::SceneSpec::reference(), 42);
    const fs::path scene_dir = p.dir / "scene";
    scene::save_scene(bundle, scene_dir.string());
    p.model = train::Model::create(scene::load_scene(scene_dir.string()), 42);

    io::RunConfig cfg;
    cfg.seed = 42;
    cfg.stage1.log_interval = 100;
    cfg.stage1.val_interval = 500;
    std::ofstream log(p.dir / "stage1.csv");
    train::train_stage1(p.model, cfg, &log, &std::cerr);
    p.model.save((p.dir / "stage1.g4ds").string());
    p.stage1_done = true;

    train::ValidationScores v = train::validate_holdout(p.model, true);
    Outcome o;
    o.seconds = elapsed(t0);
    o.pass = v.psnr_color >= 28.0 && v.psnr_feature >= 28.0 && o.seconds < 7200.0;
    o.detail = "held-out PSNR color " + fmt(v.psnr_color, 4) + " dB, feature branch " +
               fmt(v.psnr_feature, 4) + " dB (gate 28 dB), " + fmt(o.seconds / 60.0, 3) + " min";
    return o;
}

// --- criterion 7: consistency dominance ---------------------------------------

Outcome criterion7(Pipeline& p) {
    const auto t0 = Clock::now();
    if (!p.stage1_done) {
        Outcome o;
        o.detail = "skipped: stage 1 unavailable";
        return o;
    }
    std::cerr << "[criterion 7] stage-2 training...\n";
    std::vector<Tensor> train_styles;
    for (std::uint64_t s : {11ull, 12ull, 13ull, 14ull}) train_styles.push_back(make_style_image(s));
    io::RunConfig cfg;
    cfg.seed = 42;
    cfg.stage2.log_interval = 100;
    std::ofstream log(p.dir / "stage2.csv");
    train::train_stage2(p.model, train_styles, cfg, &log, &std::cerr);
    p.model.save((p.dir / "stage2.g4ds").string());
    p.stage2_done = true;

    double ours_short = 0.0, base_short = 0.0, ours_long = 0.0, base_long = 0.0;
    int n_styles = 0;
    for (std::uint64_t s : {91ull, 92ull, 93ull}) { // held-out styles
        pipeline::StyleContext ctx = pipeline::prepare_style(p.model, make_style_image(s));
        auto rs = metrics::eval_protocol(p.model, ctx, metrics::Range::Short);
        auto rl = metrics::eval_protocol(p.model, ctx, metrics::Range::Long);
        const auto ss = metrics::summarize(rs);
        const auto sl = metrics::summarize(rl);
        ours_short += ss.mean_rmse;
        base_short += ss.mean_rmse_baseline;
        ours_long += sl.mean_rmse;
        base_long += sl.mean_rmse_baseline;
        ++n_styles;
        std::ofstream csv(p.dir / ("consistency_style" + std::to_string(s) + ".csv"));
        metrics::write_reports_csv(csv, rs);
        metrics::write_reports_csv(csv, rl);
        std::cerr << "[criterion 7] style " << s << " done\n";
    }
    ours_short /= n_styles;
    base_short /= n_styles;
    ours_long /= n_styles;
    base_long /= n_styles;

    Outcome o;
    o.seconds = elapsed(t0);
    o.pass = ours_short < base_short && ours_long < base_long;
    o.detail = "short RMSE ours " + fmt(ours_short, 4) + " vs per-frame baseline " +
               fmt(base_short, 4) + "; long ours " + fmt(ours_long, 4) + " vs " + fmt(base_long, 4) +
               ", " + fmt(o.seconds / 60.0, 3) + " min";
    return o;
}

// --- criterion 9: propagation improvement -------------------------------------

Outcome criterion9(Pipeline& p) {
    const auto t0 = Clock::now();
    if (!p.stage2_done) {
        Outcome o;
        o.detail = "skipped: stage 2 unavailable";
        return o;
    }
    // Identity-kernel no-op.
    Rng rng(909);
    Tensor img = Tensor::randn({3, 16, 16}, rng);
    Tensor kernels = Tensor::zeros({9, 16, 16});
    for (std::size_t i = 0; i < 256; ++i) kernels[4 * 256 + i] = 1.0;
    Tape tk(false);
    Var noop = nets::Cspn::apply(tk, tk.constant(img), tk.constant(kernels), 3);
    const double noop_err = tk.value(noop).max_abs_diff(img);

    // Propagated vs un-propagated loss on the held-out camera, all
    // timesteps, averaged over held-out styles.
    double loss_trans = 0.0, loss_pro_total = 0.0;
    int count = 0;
    const int cam = p.model.scene.held_out_camera;
    for (std::uint64_t s : {91ull, 92ull}) {
        pipeline::StyleContext ctx = pipeline::prepare_style(p.model, make_style_image(s));
        wct::StyleTransform tr = pipeline::predict_style_transform(p.model, ctx);
        for (std::size_t j = 0; j < p.model.scene.timestamps.size(); ++j) {
            pipeline::StylizedView v = pipeline::stylize_view(p.model, tr, cam,
                                                              p.model.scene.timestamps[j], true);
            Tape t(false);
            loss_trans +=
                t.value(train::loss_pro(t, t.constant(v.pre_propagation), v.reconstruction,
                                        p.model.encoder))
                    .item();
            loss_pro_total +=
                t.value(train::loss_pro(t, t.constant(v.image), v.reconstruction, p.model.encoder))
                    .item();
            ++count;
        }
    }
    loss_trans /= count;
    loss_pro_total /= count;

    Outcome o;
    o.seconds = elapsed(t0);
    o.pass = noop_err == 0.0 && loss_pro_total <= loss_trans && o.seconds < 600.0;
    o.detail = "propagated loss " + fmt(loss_pro_total, 5) + " <= un-propagated " +
               fmt(loss_trans, 5) + ", identity-kernel err " + fmt(noop_err, 3) + ", " +
               fmt(o.seconds, 3) + " s";
    return o;
}

// --- criterion 10: determinism -------------------------------------------------

Outcome criterion10(const fs::path& dir) {
    const auto t0 = Clock::now();
    auto run_pipeline = [&](const fs::path& out) {
        fs::create_directories(out);
        scene::SceneSpec spec;
        spec.resolution = 32;
        spec.gaussians = 300;
        spec.cameras = 4;
        spec.timesteps = 3;
        scene::save_scene(scene::generate_scene(spec, 777), (out / "scene").string());
        train::Model m = train::Model::create(scene::load_scene((out / "scene").string()), 777);
        io::RunConfig cfg;
        cfg.seed = 777;
        cfg.stage1.coarse_iters = 60;
        cfg.stage1.fine_iters = 40;
        cfg.stage1.val_interval = 50;
        cfg.stage1.log_interval = 20;
        cfg.stage2.iters = 40;
        cfg.stage2.log_interval = 20;
        {
            std::ofstream log(out / "stage1.csv");
            train::train_stage1(m, cfg, &log);
        }
        m.save((out / "stage1.g4ds").string());
        std::vector<Tensor> styles = {make_style_image(31), make_style_image(32)};
        {
            std::ofstream log(out / "stage2.csv");
            train::train_stage2(m, styles, cfg, &log);
        }
        m.save((out / "stage2.g4ds").string());
        Tape t(false);
        render::RenderResult r = render::render_scene(t, m.scene.gaussians, m.scene.deformation,
                                                      m.heads, m.scene.cameras[0], 0.5);
        io::write_ppm((out / "render.ppm").string(), t.value(r.color));
        pipeline::StyleContext ctx = pipeline::prepare_style(m, styles[0]);
        auto reports = metrics::eval_protocol(m, ctx, metrics::Range::Short);
        std::ofstream csv(out / "consistency.csv");
        metrics::write_reports_csv(csv, reports);
    };
    run_pipeline(dir / "det_a");
    run_pipeline(dir / "det_b");

    bool all_equal = true;
    std::string mismatch;
    for (const char* name : {"stage1.g4ds", "stage2.g4ds", "render.ppm", "consistency.csv",
                             "stage1.csv", "stage2.csv"}) {
        if (file_bytes(dir / "det_a" / name) != file_bytes(dir / "det_b" / name)) {
            all_equal = false;
            mismatch += std::string(" ") + name;
        }
    }
    Outcome o;
    o.seconds = elapsed(t0);
    o.pass = all_equal;
    o.detail = all_equal ? "checkpoints, renders and CSVs byte-identical across two runs"
                         : ("mismatch in:" + mismatch);
    o.detail += ", " + fmt(o.seconds, 3) + " s";
    return o;
}

// --- criterion 11: performance sanity ------------------------------------------

Outcome criterion11(Pipeline& p) {
    const auto t0 = Clock::now();
    train::Model* model = nullptr;
    train::Model fallback;
    if (p.stage2_done) {
        model = &p.model;
    } else {
        fallback =
            train::Model::create(scene::generate_scene(scene::SceneSpec::reference(), 42), 42);
        fallback.trained_stage = 2;
        model = &fallback;
    }
    pipeline::StyleContext ctx = pipeline::prepare_style(*model, make_style_image(55));
    wct::StyleTransform tr = pipeline::predict_style_transform(*model, ctx);
    // Warm-up, then timed frames.
    pipeline::stylize_view(*model, tr, 0, 0.5, true);
    const int frames = 5;
    const auto f0 = Clock::now();
    for (int i = 0; i < frames; ++i)
        pipeline::stylize_view(*model, tr, i % 2, 0.4 + 0.1 * i, true);
    const double per_frame = elapsed(f0) / frames;

    Outcome o;
    o.seconds = elapsed(t0);
    o.pass = per_frame < 1.0;
    o.detail = fmt(per_frame, 4) +
               " s per stylized 64x64 frame (render + transform + inverse decode + "
               "propagation), single-threaded 64-bit CPU; GPU rasterizers report tens of "
               "milliseconds at full resolution, not directly comparable";
    return o;
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    fs::path dir = fs::temp_directory_path() / "g4ds_acceptance";
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string tok;
            while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
        } else if (std::strcmp(argv[i], "--artifacts") == 0 && i + 1 < argc) {
            dir = argv[++i];
        }
    }
    fs::create_directories(dir);
    auto selected = [&](int n) { return only.empty() || only.count(n) > 0; };

    std::map<int, Outcome> results;
    Pipeline pipe;
    pipe.dir = dir;

    // Cheap criteria first, then the training-bound chain.
    if (selected(1)) results[1] = criterion1();
    if (selected(2)) results[2] = criterion2();
    if (selected(3)) results[3] = criterion3();
    if (selected(4)) results[4] = criterion4();
    if (selected(5)) results[5] = criterion5();
    if (selected(8)) results[8] = criterion8();
    if (selected(10)) results[10] = criterion10(dir);
    if (selected(6) || selected(7) || selected(9)) results[6] = criterion6(pipe);
    if (selected(7) || selected(9)) results[7] = criterion7(pipe);
    if (selected(9)) results[9] = criterion9(pipe);
    if (selected(11)) results[11] = criterion11(pipe);

    static const std::map<int, std::string> names = {
        {1, "reversible round trip"},
        {2, "rasterizer oracle equivalence"},
        {3, "gradient suite"},
        {4, "closed-form covariance match"},
        {5, "predictor quality"},
        {6, "stage-1 reconstruction"},
        {7, "consistency dominance"},
        {8, "style interpolation linearity"},
        {9, "propagation improvement"},
        {10, "determinism"},
        {11, "performance sanity"},
    };

    bool all_pass = true;
    for (const auto& [n, name] : names) {
        if (!results.count(n)) continue;
        const Outcome& o = results.at(n);
        std::cout << "criterion " << n << " (" << name << "): " << (o.pass ? "PASS" : "FAIL")
                  << " - " << o.detail << "\n";
        if (!o.pass) all_pass = false;
    }
    return all_pass ? 0 : 1;
}
