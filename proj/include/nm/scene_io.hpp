// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "nm/errors.hpp"
#include "nm/grid_io.hpp"
#include "nm/media.hpp"

namespace nm {

using Json = nlohmann::json;

inline Json json_vec(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

inline Vec3 vec_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw io_error("expected a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json json_transform(const Transform& t) {
    Json j;
    j["translate"] = json_vec(t.translation);
    j["scale"] = t.scale;
    Json rows = Json::array();
    for (int i = 0; i < 3; ++i) rows.push_back(json_vec(t.rotation.r[i]));
    j["rotation_rows"] = rows;
    return j;
}

inline Transform transform_from_json(const Json& j) {
    Transform t;
    if (j.contains("translate")) t.translation = vec_from_json(j["translate"]);
    if (j.contains("scale")) t.scale = j["scale"].get<double>();
    if (t.scale <= 0.0) throw io_error("transform: scale must be positive");
    if (j.contains("rotation_rows")) {
        for (int i = 0; i < 3; ++i) t.rotation.r[i] = vec_from_json(j["rotation_rows"][i]);
    } else if (j.contains("rotate")) {
        const Vec3 axis = vec_from_json(j["rotate"]["axis"]);
        const double deg = j["rotate"]["degrees"].get<double>();
        t.rotation = Mat3::axis_angle(axis, deg * kPi / 180.0);
    }
    return t;
}

inline Json json_sh(const ShCoefficients& c) {
    Json j;
    j["l_max"] = c.l_max;
    Json coeffs = Json::array();
    for (const Rgb& v : c.c) coeffs.push_back(json_vec(v));
    j["coeffs"] = coeffs;
    return j;
}

inline ShCoefficients sh_from_json(const Json& j) {
    ShCoefficients c;
    c.l_max = j["l_max"].get<int>();
    for (const auto& v : j["coeffs"]) c.c.push_back(vec_from_json(v));
    if (!c.well_formed()) throw io_error("env_sh: coefficient count does not match l_max");
    return c;
}

inline Json json_light(const LightCondition& l) {
    return Json{{"position", json_vec(l.position)}, {"intensity", l.intensity}, {"env", l.env}};
}

inline LightCondition light_from_json(const Json& j) {
    LightCondition l;
    l.position = vec_from_json(j.at("position"));
    l.intensity = j.at("intensity").get<double>();
    if (l.intensity < 0.0) throw io_error("light: intensity must be >= 0");
    l.env = j.value("env", false);
    return l;
}

// Scene files are plain JSON. `base_dir` resolves relative grid payload paths.
inline Json scene_to_json(const SceneDescription& scene,
                          const std::filesystem::path& base_dir = {},
                          const std::string& grid_prefix = "grid") {
    Json j;
    j["schema"] = 1;
    j["background"] = json_vec(scene.background);
    Json lights = Json::object();
    for (const auto& [name, light] : scene.lights) lights[name] = json_light(light);
    j["lights"] = lights;
    j["env_sh"] = json_sh(scene.env_sh);
    Json instances = Json::array();
    int grid_counter = 0;
    for (const auto& inst : scene.instances) {
        Json ij;
        ij["transform"] = json_transform(inst.transform);
        if (auto* h = dynamic_cast<const HomogeneousField*>(inst.field.get())) {
            ij["kind"] = "homogeneous";
            ij["bounds"] = Json{{"min", json_vec(h->bounds().lo)}, {"max", json_vec(h->bounds().hi)}};
            ij["sigma"] = h->sample().sigma;
            ij["albedo"] = json_vec(h->sample().albedo);
            ij["g"] = h->sample().g;
        } else if (auto* s = dynamic_cast<const SphereField*>(inst.field.get())) {
            ij["kind"] = "sphere";
            ij["radius"] = s->radius();
            ij["sigma"] = s->sample().sigma;
            ij["albedo"] = json_vec(s->sample().albedo);
            ij["g"] = s->sample().g;
        } else if (auto* n = dynamic_cast<const NoiseCloudField*>(inst.field.get())) {
            const auto& p = n->params();
            ij["kind"] = "noise_cloud";
            ij["radius"] = p.radius;
            ij["sigma"] = p.sigma_scale;
            ij["albedo"] = json_vec(p.albedo);
            ij["g"] = p.g;
            ij["noise"] = Json{{"frequency", p.frequency},
                               {"octaves", p.octaves},
                               {"threshold", p.threshold},
                               {"seed", p.seed}};
        } else if (auto* grid = dynamic_cast<const GridField*>(inst.field.get())) {
            ij["kind"] = "grid";
            const std::string name = grid_prefix + std::to_string(grid_counter++) + ".nmgrid";
            ij["grid"] = name;
            ij["bounds"] =
                Json{{"min", json_vec(grid->bounds().lo)}, {"max", json_vec(grid->bounds().hi)}};
            if (!base_dir.empty()) write_grid((base_dir / name).string(), *grid);
        } else {
            throw io_error("scene_to_json: unserializable field kind");
        }
        instances.push_back(ij);
    }
    j["instances"] = instances;
    return j;
}

inline SceneDescription scene_from_json(const Json& j,
                                        const std::filesystem::path& base_dir = {}) {
    SceneDescription scene;
    if (j.value("schema", 0) != 1) throw io_error("scene: unsupported schema version");
    scene.background = j.contains("background") ? vec_from_json(j["background"]) : Rgb{};
    if (j.contains("lights"))
        for (const auto& [name, lj] : j["lights"].items())
            scene.lights[name] = light_from_json(lj);
    if (j.contains("env_sh")) scene.env_sh = sh_from_json(j["env_sh"]);
    if (!j.contains("instances") || j["instances"].empty())
        throw io_error("scene: needs at least one instance");
    for (const auto& ij : j["instances"]) {
        MediumInstance inst;
        inst.transform = ij.contains("transform") ? transform_from_json(ij["transform"])
                                                  : Transform::identity();
        const std::string kind = ij.at("kind").get<std::string>();
        if (kind == "homogeneous") {
            const Aabb box{vec_from_json(ij.at("bounds").at("min")),
                           vec_from_json(ij.at("bounds").at("max"))};
            inst.field = std::make_shared<HomogeneousField>(
                box, MediumSample{ij.at("sigma").get<double>(), vec_from_json(ij.at("albedo")),
                                  ij.value("g", 0.0)});
        } else if (kind == "sphere") {
            inst.field = std::make_shared<SphereField>(
                ij.at("radius").get<double>(),
                MediumSample{ij.at("sigma").get<double>(), vec_from_json(ij.at("albedo")),
                             ij.value("g", 0.0)});
        } else if (kind == "noise_cloud") {
            NoiseCloudParams p;
            p.radius = ij.at("radius").get<double>();
            p.sigma_scale = ij.at("sigma").get<double>();
            p.albedo = vec_from_json(ij.at("albedo"));
            p.g = ij.value("g", 0.0);
            if (ij.contains("noise")) {
                const auto& nj = ij["noise"];
                p.frequency = nj.value("frequency", p.frequency);
                p.octaves = nj.value("octaves", p.octaves);
                p.threshold = nj.value("threshold", p.threshold);
                p.seed = nj.value("seed", p.seed);
            }
            inst.field = std::make_shared<NoiseCloudField>(p);
        } else if (kind == "grid") {
            const Aabb box{vec_from_json(ij.at("bounds").at("min")),
                           vec_from_json(ij.at("bounds").at("max"))};
            const std::filesystem::path rel = ij.at("grid").get<std::string>();
            inst.field = read_grid((base_dir / rel).string(), box);
        } else {
            throw io_error("scene: unknown field kind '" + kind + "'");
        }
        scene.instances.push_back(std::move(inst));
    }
    return scene;
}

inline void save_scene(const std::string& path, const SceneDescription& scene) {
    const std::filesystem::path p(path);
    std::filesystem::create_directories(p.parent_path().empty() ? "." : p.parent_path());
    const Json j = scene_to_json(scene, p.parent_path(), p.stem().string() + "_grid");
    std::ofstream f(path);
    if (!f) throw io_error("save_scene: cannot open " + path);
    f << j.dump(2) << "\n";
}

inline SceneDescription load_scene(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("load_scene: cannot open " + path);
    Json j;
    try {
        f >> j;
    } catch (const Json::exception& e) {
        throw io_error("load_scene: " + std::string(e.what()));
    }
    return scene_from_json(j, std::filesystem::path(path).parent_path());
}

}  // namespace nm
