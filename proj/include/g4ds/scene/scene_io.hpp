#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "g4ds/io/ppm.hpp"
#include "g4ds/scene/generate.hpp"

namespace g4ds::scene {

// Scene directory layout: scene.json (versioned header, row-major arrays)
// plus ground-truth images as PPM files referenced by relative path.

namespace detail {

inline nlohmann::json tensor_json(const Tensor& t) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < t.numel(); ++i) arr.push_back(t[i]);
    return arr;
}

inline Tensor tensor_from_json(const nlohmann::json& arr, std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    if (arr.size() != t.numel())
        throw std::runtime_error("scene: array length mismatch in scene.json");
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = arr[i].get<double>();
    return t;
}

inline nlohmann::json texture_json(const SurfaceTexture& tex) {
    nlohmann::json j;
    for (int c = 0; c < 3; ++c) {
        j["amp"].push_back(tex.amp[c]);
        j["phase"].push_back(tex.phase[c]);
        j["freq"].push_back({tex.freq[c].x, tex.freq[c].y, tex.freq[c].z});
    }
    return j;
}

inline SurfaceTexture texture_from_json(const nlohmann::json& j) {
    SurfaceTexture tex;
    for (int c = 0; c < 3; ++c) {
        tex.amp[c] = j.at("amp")[c].get<double>();
        tex.phase[c] = j.at("phase")[c].get<double>();
        tex.freq[c] = Vec3{j.at("freq")[c][0].get<double>(), j.at("freq")[c][1].get<double>(),
                           j.at("freq")[c][2].get<double>()};
    }
    return tex;
}

inline nlohmann::json vec3_json(const Vec3& v) { return {v.x, v.y, v.z}; }
inline Vec3 vec3_from_json(const nlohmann::json& j) {
    return Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

} // namespace detail

inline void save_scene(const SceneBundle& b, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json j;
    j["format"] = "g4ds-scene";
    j["version"] = 1;
    j["seed"] = b.seed;
    j["held_out_camera"] = b.held_out_camera;
    j["spec"] = {{"primitives", b.spec.primitives},
                 {"motion", b.spec.motion == MotionModel::Linear ? "linear" : "orbital"},
                 {"cameras", b.spec.cameras},
                 {"resolution", b.spec.resolution},
                 {"timesteps", b.spec.timesteps},
                 {"gaussians", b.spec.gaussians},
                 {"motion_scale", b.spec.motion_scale}};
    j["timestamps"] = b.timestamps;

    for (const auto& cam : b.cameras) {
        nlohmann::json cj;
        cj["fx"] = cam.fx;
        cj["fy"] = cam.fy;
        cj["cx"] = cam.cx;
        cj["cy"] = cam.cy;
        cj["width"] = cam.width;
        cj["height"] = cam.height;
        for (int i = 0; i < 9; ++i) cj["rotation"].push_back(cam.rotation.m[static_cast<std::size_t>(i)]);
        cj["translation"] = detail::vec3_json(cam.translation);
        j["cameras"].push_back(cj);
    }

    nlohmann::json oj;
    oj["motion"] = b.oracle.motion == MotionModel::Linear ? "linear" : "orbital";
    oj["background_radius"] = b.oracle.background_radius;
    oj["background_texture"] = detail::texture_json(b.oracle.background_texture);
    oj["spheres"] = nlohmann::json::array();
    for (const auto& sp : b.oracle.spheres) {
        nlohmann::json sj;
        sj["center"] = detail::vec3_json(sp.base_center);
        sj["radius"] = sp.radius;
        sj["velocity"] = detail::vec3_json(sp.velocity);
        sj["omega"] = sp.omega;
        sj["texture"] = detail::texture_json(sp.texture);
        oj["spheres"].push_back(sj);
    }
    j["oracle"] = oj;

    const auto& gc = b.gaussians;
    j["gaussians"] = {{"count", gc.size()},
                      {"centers", detail::tensor_json(gc.centers.value)},
                      {"log_scales", detail::tensor_json(gc.log_scales.value)},
                      {"rotations", detail::tensor_json(gc.rotations.value)},
                      {"opacity_logits", detail::tensor_json(gc.opacity_logits.value)},
                      {"features", detail::tensor_json(gc.features.value)}};

    const auto& field = b.deformation;
    nlohmann::json dj;
    dj["aabb_min"] = detail::vec3_json(field.aabb_min());
    dj["aabb_max"] = detail::vec3_json(field.aabb_max());
    dj["resolutions"] = field.resolutions();
    for (std::size_t r = 0; r < field.resolutions().size(); ++r)
        for (int p = 0; p < DeformationField::kNumPlanes; ++p)
            dj["grids"].push_back(detail::tensor_json(field.grid(r, p).value));
    for (std::size_t l = 0; l < field.decoder().layer_count(); ++l) {
        dj["decoder_weights"].push_back(detail::tensor_json(field.decoder().weight(l).value));
        dj["decoder_biases"].push_back(detail::tensor_json(field.decoder().bias(l).value));
    }
    j["deformation"] = dj;

    j["ground_truth"] = nlohmann::json::array();
    for (std::size_t cam = 0; cam < b.cameras.size(); ++cam)
        for (std::size_t t = 0; t < b.timestamps.size(); ++t) {
            const std::string name =
                "gt_c" + std::to_string(cam) + "_t" + std::to_string(t) + ".ppm";
            io::write_ppm((fs::path(dir) / name).string(),
                          b.ground_truth[cam * b.timestamps.size() + t]);
            j["ground_truth"].push_back(
                {{"camera", cam}, {"t_index", t}, {"path", name}});
        }

    std::ofstream f(fs::path(dir) / "scene.json");
    if (!f) throw std::runtime_error("save_scene: cannot write scene.json in " + dir);
    f << j.dump(1) << "\n";
}

/// Loads a scene directory. Ground truth comes back through the PPM files,
/// i.e. quantized exactly as persisted.
inline SceneBundle load_scene(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path json_path = fs::path(dir) / "scene.json";
    std::ifstream f(json_path);
    if (!f) throw std::runtime_error("load_scene: cannot open " + json_path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("load_scene: " + std::string(e.what()));
    }
    if (j.value("format", "") != "g4ds-scene")
        throw std::runtime_error("load_scene: not a g4ds-scene file: " + json_path.string());
    if (j.value("version", 0) != 1)
        throw std::runtime_error("load_scene: unsupported version");

    SceneBundle b;
    b.seed = j.at("seed").get<std::uint64_t>();
    b.held_out_camera = j.at("held_out_camera").get<int>();
    const auto& sj = j.at("spec");
    b.spec.primitives = sj.at("primitives").get<int>();
    b.spec.motion = sj.at("motion").get<std::string>() == "orbital" ? MotionModel::Orbital
                                                                    : MotionModel::Linear;
    b.spec.cameras = sj.at("cameras").get<int>();
    b.spec.resolution = sj.at("resolution").get<int>();
    b.spec.timesteps = sj.at("timesteps").get<int>();
    b.spec.gaussians = sj.at("gaussians").get<int>();
    b.spec.motion_scale = sj.at("motion_scale").get<double>();
    b.timestamps = j.at("timestamps").get<std::vector<double>>();

    for (const auto& cj : j.at("cameras")) {
        Camera cam;
        cam.fx = cj.at("fx").get<double>();
        cam.fy = cj.at("fy").get<double>();
        cam.cx = cj.at("cx").get<double>();
        cam.cy = cj.at("cy").get<double>();
        cam.width = cj.at("width").get<int>();
        cam.height = cj.at("height").get<int>();
        for (int i = 0; i < 9; ++i) cam.rotation.m[static_cast<std::size_t>(i)] = cj.at("rotation")[i].get<double>();
        cam.translation = detail::vec3_from_json(cj.at("translation"));
        b.cameras.push_back(cam);
    }

    const auto& oj = j.at("oracle");
    b.oracle.motion = oj.at("motion").get<std::string>() == "orbital" ? MotionModel::Orbital
                                                                      : MotionModel::Linear;
    b.oracle.background_radius = oj.at("background_radius").get<double>();
    b.oracle.background_texture = detail::texture_from_json(oj.at("background_texture"));
    for (const auto& spj : oj.at("spheres")) {
        SpherePrimitive sp;
        sp.base_center = detail::vec3_from_json(spj.at("center"));
        sp.radius = spj.at("radius").get<double>();
        sp.velocity = detail::vec3_from_json(spj.at("velocity"));
        sp.omega = spj.at("omega").get<double>();
        sp.texture = detail::texture_from_json(spj.at("texture"));
        b.oracle.spheres.push_back(sp);
    }

    const auto& gj = j.at("gaussians");
    const std::size_t n = gj.at("count").get<std::size_t>();
    b.gaussians = GaussianCloud(n);
    b.gaussians.centers.value = detail::tensor_from_json(gj.at("centers"), {n, 3});
    b.gaussians.log_scales.value = detail::tensor_from_json(gj.at("log_scales"), {n, 3});
    b.gaussians.rotations.value = detail::tensor_from_json(gj.at("rotations"), {n, 4});
    b.gaussians.opacity_logits.value = detail::tensor_from_json(gj.at("opacity_logits"), {n, 1});
    b.gaussians.features.value = detail::tensor_from_json(gj.at("features"), {n, kFeatureDim});

    const auto& dj = j.at("deformation");
    Rng dummy(0);
    b.deformation = DeformationField(detail::vec3_from_json(dj.at("aabb_min")),
                                     detail::vec3_from_json(dj.at("aabb_max")), dummy,
                                     dj.at("resolutions").get<std::vector<int>>());
    std::size_t gi = 0;
    for (std::size_t r = 0; r < b.deformation.resolutions().size(); ++r)
        for (int p = 0; p < DeformationField::kNumPlanes; ++p) {
            auto& grid = b.deformation.grid(r, p);
            grid.value = detail::tensor_from_json(dj.at("grids")[gi++], grid.value.shape());
        }
    for (std::size_t l = 0; l < b.deformation.decoder().layer_count(); ++l) {
        auto& w = b.deformation.decoder().weight(l);
        w.value = detail::tensor_from_json(dj.at("decoder_weights")[l], w.value.shape());
        auto& bias = b.deformation.decoder().bias(l);
        bias.value = detail::tensor_from_json(dj.at("decoder_biases")[l], bias.value.shape());
    }

    b.ground_truth.resize(b.cameras.size() * b.timestamps.size());
    for (const auto& gt : j.at("ground_truth")) {
        const std::size_t cam = gt.at("camera").get<std::size_t>();
        const std::size_t t = gt.at("t_index").get<std::size_t>();
        b.ground_truth[cam * b.timestamps.size() + t] =
            io::read_ppm((fs::path(dir) / gt.at("path").get<std::string>()).string());
    }
    return b;
}

} // namespace g4ds::scene
