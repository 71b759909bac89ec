#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace g4ds::io {

/// Training/run configuration. Every key has a default; unknown keys in a
/// parsed document are a hard error, and parse -> serialize is idempotent
/// (keys are emitted sorted).
struct RunConfig {
    struct Stage1 {
        int coarse_iters = 3000;
        int fine_iters = 1500;
        double lr_scene = 1.6e-3;       // Gaussians + deformation field
        double lr_scene_final = 1.6e-4; // exponential decay target
        double lr_nets = 1e-3;          // heads + reversible network
        double lambda_embed_color = 1.0;
        double lambda_embed_feature = 1.0;
        int val_interval = 500;
        int log_interval = 100;
        int checkpoint_interval = 0; // 0 = only final
    };
    struct Stage2 {
        int iters = 1500;
        double lr = 1e-3;
        double lambda_content = 1.0;
        double lambda_style = 10.0;
        int cspn_iterations = 3;
        int log_interval = 100;
    };

    std::uint64_t seed = 0;
    Stage1 stage1;
    Stage2 stage2;

    void validate() const {
        if (stage1.coarse_iters < 0 || stage1.fine_iters < 0 || stage2.iters < 0)
            throw std::invalid_argument("config: iteration counts must be non-negative");
        if (stage1.lambda_embed_color < 0 || stage1.lambda_embed_feature < 0 ||
            stage2.lambda_content < 0 || stage2.lambda_style < 0)
            throw std::invalid_argument("config: loss weights must be non-negative");
        if (stage1.lr_scene <= 0 || stage1.lr_scene_final <= 0 || stage1.lr_nets <= 0 ||
            stage2.lr <= 0)
            throw std::invalid_argument("config: learning rates must be positive");
        if (stage2.cspn_iterations < 1)
            throw std::invalid_argument("config: cspn_iterations must be >= 1");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["stage1"] = {{"coarse_iters", stage1.coarse_iters},
                       {"fine_iters", stage1.fine_iters},
                       {"lr_scene", stage1.lr_scene},
                       {"lr_scene_final", stage1.lr_scene_final},
                       {"lr_nets", stage1.lr_nets},
                       {"lambda_embed_color", stage1.lambda_embed_color},
                       {"lambda_embed_feature", stage1.lambda_embed_feature},
                       {"val_interval", stage1.val_interval},
                       {"log_interval", stage1.log_interval},
                       {"checkpoint_interval", stage1.checkpoint_interval}};
        j["stage2"] = {{"iters", stage2.iters},
                       {"lr", stage2.lr},
                       {"lambda_content", stage2.lambda_content},
                       {"lambda_style", stage2.lambda_style},
                       {"cspn_iterations", stage2.cspn_iterations},
                       {"log_interval", stage2.log_interval}};
        return j;
    }

    std::string serialize() const { return to_json().dump(2) + "\n"; }

    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig cfg;
        const nlohmann::json defaults = cfg.to_json();
        check_keys(j, defaults, "");
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("stage1")) {
            const auto& s = j.at("stage1");
            auto& c = cfg.stage1;
            c.coarse_iters = s.value("coarse_iters", c.coarse_iters);
            c.fine_iters = s.value("fine_iters", c.fine_iters);
            c.lr_scene = s.value("lr_scene", c.lr_scene);
            c.lr_scene_final = s.value("lr_scene_final", c.lr_scene_final);
            c.lr_nets = s.value("lr_nets", c.lr_nets);
            c.lambda_embed_color = s.value("lambda_embed_color", c.lambda_embed_color);
            c.lambda_embed_feature = s.value("lambda_embed_feature", c.lambda_embed_feature);
            c.val_interval = s.value("val_interval", c.val_interval);
            c.log_interval = s.value("log_interval", c.log_interval);
            c.checkpoint_interval = s.value("checkpoint_interval", c.checkpoint_interval);
        }
        if (j.contains("stage2")) {
            const auto& s = j.at("stage2");
            auto& c = cfg.stage2;
            c.iters = s.value("iters", c.iters);
            c.lr = s.value("lr", c.lr);
            c.lambda_content = s.value("lambda_content", c.lambda_content);
            c.lambda_style = s.value("lambda_style", c.lambda_style);
            c.cspn_iterations = s.value("cspn_iterations", c.cspn_iterations);
            c.log_interval = s.value("log_interval", c.log_interval);
        }
        cfg.validate();
        return cfg;
    }

    static RunConfig parse(const std::string& text) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::invalid_argument(std::string("config: ") + e.what());
        }
        return from_json(j);
    }

    static RunConfig load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("config: cannot open " + path);
        std::ostringstream ss;
        ss << f.rdbuf();
        return parse(ss.str());
    }

private:
    static void check_keys(const nlohmann::json& j, const nlohmann::json& defaults,
                           const std::string& prefix) {
        if (!j.is_object()) throw std::invalid_argument("config: expected an object at " + prefix);
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
            if (!defaults.contains(it.key()))
                throw std::invalid_argument("config: unknown key '" + path + "'");
            if (defaults.at(it.key()).is_object()) check_keys(it.value(), defaults.at(it.key()), path);
        }
    }
};

} // namespace g4ds::io
