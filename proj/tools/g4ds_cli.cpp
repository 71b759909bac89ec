// Command-line front end: scene generation, the two training stages,
// rendering, stylization, style interpolation, consistency evaluation and
// the gradient-check suite.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "g4ds/io/checkpoint.hpp"
#include "g4ds/io/flow_io.hpp"
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

namespace {

io::RunConfig load_config(const std::string& path, std::uint64_t seed, bool seed_given) {
    io::RunConfig cfg;
    if (!path.empty()) cfg = io::RunConfig::load(path);
    if (seed_given) cfg.seed = seed;
    return cfg;
}

std::vector<Tensor> load_styles_dir(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".ppm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<Tensor> styles;
    for (const auto& f : files) styles.push_back(io::read_ppm(f.string()));
    if (styles.empty()) throw std::runtime_error("no .ppm style images found in " + dir);
    return styles;
}

std::uint32_t file_crc(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    const std::string b = ss.str();
    return io::detail::crc32(reinterpret_cast<const unsigned char*>(b.data()), b.size());
}

void write_image_chw(const std::string& path, const Tensor& chw) {
    io::write_ppm(path, pipeline::chw_to_hwc(pipeline::clamp01(chw)));
}

/// Style transform with optional (coloring, style-mean) caching keyed by the
/// style file's content hash.
wct::StyleTransform transform_for_style(train::Model& model, const std::string& style_path,
                                        const std::string& cache_dir) {
    fs::path cache_file;
    if (!cache_dir.empty()) {
        fs::create_directories(cache_dir);
        char key[16];
        std::snprintf(key, sizeof(key), "%08x", file_crc(style_path));
        cache_file = fs::path(cache_dir) / (std::string(key) + ".g4ds");
    }

    if (!cache_file.empty() && fs::exists(cache_file)) {
        io::Checkpoint ck = io::Checkpoint::load(cache_file.string());
        wct::StyleTransform tr;
        tr.coloring = ck.get("coloring");
        tr.style_mean = ck.get("style_mean");
        Tape t(false);
        Var f_c = model.phi_c.forward(t, t.constant(model.scene.gaussians.features.value));
        tr.whitening = t.value(model.mlp_c.forward(t, f_c));
        tr.content_mean = pipeline::gaussian_feature_mean(model);
        return tr;
    }

    pipeline::StyleContext ctx = pipeline::prepare_style(model, io::read_ppm(style_path));
    wct::StyleTransform tr = pipeline::predict_style_transform(model, ctx);
    if (!cache_file.empty()) {
        io::Checkpoint ck;
        ck.put("coloring", tr.coloring);
        ck.put("style_mean", tr.style_mean);
        ck.save(cache_file.string());
    }
    return tr;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"4D Gaussian stylization pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    bool seed_given = false;
    app.add_option("--seed", seed, "seed for all randomness")->each([&](const std::string&) {
        seed_given = true;
    });

    // gen-scene
    auto* gen = app.add_subcommand("gen-scene", "generate a procedural scene directory");
    gen->fallthrough();
    scene::SceneSpec spec;
    std::string gen_out;
    std::string motion_name = "linear";
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--primitives", spec.primitives, "moving sphere count");
    gen->add_option("--motion", motion_name, "linear|orbital");
    gen->add_option("--cameras", spec.cameras, "ring camera count");
    gen->add_option("--resolution", spec.resolution, "square image size");
    gen->add_option("--timesteps", spec.timesteps, "timestep count");
    gen->add_option("--gaussians", spec.gaussians, "gaussian count");
    gen->add_option("--motion-scale", spec.motion_scale, "velocity scale (0 = static)");

    // train-embed
    auto* te = app.add_subcommand("train-embed", "stage 1: embedding training");
    te->fallthrough();
    std::string te_scene, te_out, te_config, te_log;
    te->add_option("--scene", te_scene, "scene directory")->required();
    te->add_option("--out", te_out, "output checkpoint")->required();
    te->add_option("--config", te_config, "config JSON");
    te->add_option("--log", te_log, "metrics CSV path");

    // train-style
    auto* ts = app.add_subcommand("train-style", "stage 2: style transform training");
    ts->fallthrough();
    std::string ts_ckpt, ts_styles, ts_out, ts_config, ts_log;
    ts->add_option("--ckpt", ts_ckpt, "stage-1 checkpoint")->required();
    ts->add_option("--styles", ts_styles, "directory of .ppm style images")->required();
    ts->add_option("--out", ts_out, "output checkpoint")->required();
    ts->add_option("--config", ts_config, "config JSON");
    ts->add_option("--log", ts_log, "metrics CSV path");

    // render
    auto* rd = app.add_subcommand("render", "render a view from a checkpoint");
    rd->fallthrough();
    std::string rd_ckpt, rd_out;
    int rd_camera = 0;
    double rd_time = 0.0;
    rd->add_option("--ckpt", rd_ckpt)->required();
    rd->add_option("--camera", rd_camera, "camera index")->required();
    rd->add_option("--t", rd_time, "time in [0,1]")->required();
    rd->add_option("--out", rd_out, "output PPM")->required();

    // stylize
    auto* st = app.add_subcommand("stylize", "stylized render of a view");
    st->fallthrough();
    std::string st_ckpt, st_style, st_out, st_cache;
    int st_camera = 0;
    double st_time = 0.0;
    bool st_no_prop = false;
    st->add_option("--ckpt", st_ckpt)->required();
    st->add_option("--style", st_style, "style image (PPM)")->required();
    st->add_option("--camera", st_camera)->required();
    st->add_option("--t", st_time)->required();
    st->add_option("--out", st_out)->required();
    st->add_flag("--no-propagation", st_no_prop, "emit the un-propagated stylization");
    st->add_option("--style-cache", st_cache, "cache directory for per-style transforms");

    // interpolate
    auto* ip = app.add_subcommand("interpolate", "blend styles over a view sweep");
    ip->fallthrough();
    std::string ip_ckpt, ip_outdir, ip_weights;
    std::vector<std::string> ip_styles;
    ip->add_option("--ckpt", ip_ckpt)->required();
    ip->add_option("--styles", ip_styles, "style PPMs")->required()->expected(-2);
    ip->add_option("--weights", ip_weights, "comma-separated, sums to 1")->required();
    ip->add_option("--out-dir", ip_outdir)->required();

    // eval-consistency
    auto* ev = app.add_subcommand("eval-consistency", "warped-consistency protocol");
    ev->fallthrough();
    std::string ev_ckpt, ev_style, ev_out, ev_range = "short", ev_summary;
    ev->add_option("--ckpt", ev_ckpt)->required();
    ev->add_option("--style", ev_style, "style image (PPM)")->required();
    ev->add_option("--range", ev_range, "short|long");
    ev->add_option("--out", ev_out, "CSV output")->required();
    ev->add_option("--summary", ev_summary, "JSON summary output");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gc->fallthrough();
    std::string gc_component = "all";
    int gc_trials = 5;
    gc->add_option("--component", gc_component, "component name or 'all'");
    gc->add_option("--trials", gc_trials, "random trials per component");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            if (motion_name != "linear" && motion_name != "orbital")
                throw std::invalid_argument("--motion must be linear or orbital");
            spec.motion = motion_name == "orbital" ? scene::MotionModel::Orbital
                                                   : scene::MotionModel::Linear;
            scene::save_scene(scene::generate_scene(spec, seed), gen_out);
            std::cout << "wrote scene to " << gen_out << "\n";
        } else if (*te) {
            io::RunConfig cfg = load_config(te_config, seed, seed_given);
            train::Model model = train::Model::create(scene::load_scene(te_scene), cfg.seed);
            std::ofstream log;
            if (!te_log.empty()) log.open(te_log);
            train::train_stage1(model, cfg, te_log.empty() ? nullptr : &log, &std::cout);
            model.save(te_out);
            std::cout << "wrote checkpoint to " << te_out << "\n";
        } else if (*ts) {
            io::RunConfig cfg = load_config(ts_config, seed, seed_given);
            train::Model model = train::Model::load(ts_ckpt);
            std::ofstream log;
            if (!ts_log.empty()) log.open(ts_log);
            train::train_stage2(model, load_styles_dir(ts_styles), cfg,
                                ts_log.empty() ? nullptr : &log, &std::cout);
            model.save(ts_out);
            std::cout << "wrote checkpoint to " << ts_out << "\n";
        } else if (*rd) {
            train::Model model = train::Model::load(rd_ckpt);
            if (rd_camera < 0 || rd_camera >= static_cast<int>(model.scene.cameras.size()))
                throw std::runtime_error("camera index out of range");
            Tape t(false);
            render::RenderResult r = render::render_scene(
                t, model.scene.gaussians, model.scene.deformation, model.heads,
                model.scene.cameras[static_cast<std::size_t>(rd_camera)], rd_time);
            io::write_ppm(rd_out, t.value(r.color));
            std::cout << "wrote " << rd_out << "\n";
        } else if (*st) {
            train::Model model = train::Model::load(st_ckpt);
            if (st_camera < 0 || st_camera >= static_cast<int>(model.scene.cameras.size()))
                throw std::runtime_error("camera index out of range");
            wct::StyleTransform tr = transform_for_style(model, st_style, st_cache);
            pipeline::StylizedView view =
                pipeline::stylize_view(model, tr, st_camera, st_time, !st_no_prop);
            write_image_chw(st_out, st_no_prop ? view.pre_propagation : view.image);
            std::cout << "wrote " << st_out << "\n";
        } else if (*ip) {
            train::Model model = train::Model::load(ip_ckpt);
            std::vector<double> weights;
            {
                std::stringstream ss(ip_weights);
                std::string tok;
                while (std::getline(ss, tok, ',')) weights.push_back(std::stod(tok));
            }
            if (weights.size() != ip_styles.size())
                throw std::invalid_argument("--weights: one weight per style required");
            std::vector<std::pair<wct::StyleTransform, double>> entries;
            for (std::size_t i = 0; i < ip_styles.size(); ++i) {
                pipeline::StyleContext ctx =
                    pipeline::prepare_style(model, io::read_ppm(ip_styles[i]));
                entries.emplace_back(pipeline::predict_style_transform(model, ctx), weights[i]);
            }
            const wct::StyleTransform blend = wct::interpolate_styles(entries);
            fs::create_directories(ip_outdir);
            const int n_cams = static_cast<int>(model.scene.cameras.size());
            for (std::size_t j = 0; j < model.scene.timestamps.size(); ++j) {
                const int cam = static_cast<int>(j) % n_cams;
                pipeline::StylizedView view = pipeline::stylize_view(
                    model, blend, cam, model.scene.timestamps[j], model.trained_stage >= 2);
                char name[32];
                std::snprintf(name, sizeof(name), "frame_%03zu.ppm", j);
                write_image_chw((fs::path(ip_outdir) / name).string(), view.image);
            }
            std::cout << "wrote sweep to " << ip_outdir << "\n";
        } else if (*ev) {
            if (ev_range != "short" && ev_range != "long")
                throw std::invalid_argument("--range must be short or long");
            train::Model model = train::Model::load(ev_ckpt);
            pipeline::StyleContext ctx =
                pipeline::prepare_style(model, io::read_ppm(ev_style));
            auto reports = metrics::eval_protocol(
                model, ctx, ev_range == "short" ? metrics::Range::Short : metrics::Range::Long);
            std::ofstream csv(ev_out);
            if (!csv) throw std::runtime_error("cannot open " + ev_out);
            metrics::write_reports_csv(csv, reports);
            const metrics::ProtocolSummary s = metrics::summarize(reports);
            nlohmann::json summary = {{"range", ev_range},
                                      {"pairs", s.pairs},
                                      {"mean_rmse", s.mean_rmse},
                                      {"mean_feat_dist", s.mean_feat_dist},
                                      {"mean_rmse_baseline", s.mean_rmse_baseline},
                                      {"mean_feat_dist_baseline", s.mean_feat_dist_baseline}};
            if (!ev_summary.empty()) {
                std::ofstream js(ev_summary);
                js << summary.dump(2) << "\n";
            }
            std::cout << summary.dump(2) << "\n";
        } else if (*gc) {
            auto results = train::grad_check(gc_component, gc_trials, &std::cout);
            for (const auto& r : results)
                if (!r.passed) return 2;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
