#include "irid/core/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"

#include "irid/core/io.hpp"

namespace irid {

using nlohmann::json;

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const json& j) {
    require(j.is_array() && j.size() == 3, "manifest: malformed 3-vector");
    return {j[0].get<float>(), j[1].get<float>(), j[2].get<float>()};
}

json camera_to_json(const Camera& c) {
    return {{"position", vec_to_json(c.position)},
            {"look_at", vec_to_json(c.look_at)},
            {"up", vec_to_json(c.up)},
            {"vfov_rad", c.vfov_rad},
            {"width", c.width},
            {"height", c.height}};
}

Camera camera_from_json(const json& j) {
    Camera c;
    c.position = vec_from_json(j.at("position"));
    c.look_at = vec_from_json(j.at("look_at"));
    c.up = vec_from_json(j.at("up"));
    c.vfov_rad = j.at("vfov_rad").get<float>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    return c;
}

void check_image(const DatasetManifest& m, const std::string& rel, const std::string& owner) {
    std::string full = m.resolve(rel);
    if (!std::filesystem::exists(full))
        raise("manifest: entry " + owner + " references missing file '" + rel + "'");
    auto [w, h] = probe_image_size(full);
    if (w != m.resolution || h != m.resolution)
        raise("manifest: entry " + owner + " file '" + rel + "' is " + std::to_string(w) + "x" +
              std::to_string(h) + ", expected " + std::to_string(m.resolution));
}

} // namespace

const ManifestEntry& DatasetManifest::entry(int object, int view_id, int light_id) const {
    const ManifestObject& obj = objects.at(object);
    for (const ManifestEntry& e : obj.entries)
        if (e.view_id == view_id && e.light_id == light_id) return e;
    raise("manifest: no entry (view " + std::to_string(view_id) + ", light " +
          std::to_string(light_id) + ") in object " + obj.object_id);
}

std::string DatasetManifest::resolve(const std::string& rel_path) const {
    if (root.empty()) return rel_path;
    return (std::filesystem::path(root) / rel_path).string();
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    json j;
    j["version"] = 1;
    j["resolution"] = m.resolution;
    if (m.partial) {
        j["partial"] = true;
        j["error"] = m.error;
    }
    j["objects"] = json::array();
    for (const ManifestObject& obj : m.objects) {
        json jo;
        jo["object_id"] = obj.object_id;
        jo["scene_seed"] = obj.scene_seed;
        jo["views"] = json::array();
        for (size_t v = 0; v < obj.views.size(); ++v) {
            json jv = camera_to_json(obj.views[v]);
            jv["view_id"] = static_cast<int>(v);
            jo["views"].push_back(jv);
        }
        jo["lights"] = json::array();
        for (const LightRecord& l : obj.lights) {
            json jl = {{"light_id", l.light_id}, {"slot", l.slot},
                       {"seed", l.seed}, {"kind", l.kind}};
            if (!l.positions.empty()) {
                jl["positions"] = json::array();
                jl["intensities"] = json::array();
                for (const Vec3& p : l.positions) jl["positions"].push_back(vec_to_json(p));
                for (const Vec3& i : l.intensities) jl["intensities"].push_back(vec_to_json(i));
            }
            jo["lights"].push_back(jl);
        }
        jo["entries"] = json::array();
        for (const ManifestEntry& e : obj.entries)
            jo["entries"].push_back({{"view_id", e.view_id},
                                     {"light_id", e.light_id},
                                     {"rgb_path", e.rgb_path},
                                     {"albedo_path", e.albedo_path},
                                     {"normal_path", e.normal_path},
                                     {"mr_path", e.mr_path},
                                     {"mask_path", e.mask_path},
                                     {"rgb_pfm", e.rgb_pfm},
                                     {"albedo_pfm", e.albedo_pfm},
                                     {"normal_pfm", e.normal_pfm},
                                     {"mr_pfm", e.mr_pfm}});
        j["objects"].push_back(jo);
    }
    std::ofstream out(path);
    require(out.good(), "save_manifest: cannot write '" + path + "'");
    out << j.dump(1) << "\n";
    require(out.good(), "save_manifest: write failed for '" + path + "'");
}

DatasetManifest load_manifest(const std::string& path, bool validate) {
    std::ifstream in(path);
    require(in.good(), "load_manifest: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        raise("load_manifest: malformed JSON in '" + path + "': " + e.what());
    }

    DatasetManifest m;
    m.root = std::filesystem::path(path).parent_path().string();
    try {
        m.resolution = j.at("resolution").get<int>();
        m.partial = j.value("partial", false);
        m.error = j.value("error", std::string());
        for (const json& jo : j.at("objects")) {
            ManifestObject obj;
            obj.object_id = jo.at("object_id").get<std::string>();
            obj.scene_seed = jo.at("scene_seed").get<uint64_t>();
            for (const json& jv : jo.at("views")) obj.views.push_back(camera_from_json(jv));
            for (const json& jl : jo.at("lights")) {
                LightRecord l;
                l.light_id = jl.at("light_id").get<int>();
                l.slot = jl.at("slot").get<int>();
                l.seed = jl.at("seed").get<uint64_t>();
                l.kind = jl.at("kind").get<std::string>();
                if (jl.contains("positions")) {
                    for (const json& p : jl["positions"]) l.positions.push_back(vec_from_json(p));
                    for (const json& i : jl["intensities"]) l.intensities.push_back(vec_from_json(i));
                }
                obj.lights.push_back(l);
            }
            for (const json& je : jo.at("entries")) {
                ManifestEntry e;
                e.view_id = je.at("view_id").get<int>();
                e.light_id = je.at("light_id").get<int>();
                e.rgb_path = je.at("rgb_path").get<std::string>();
                e.albedo_path = je.at("albedo_path").get<std::string>();
                e.normal_path = je.at("normal_path").get<std::string>();
                e.mr_path = je.at("mr_path").get<std::string>();
                e.mask_path = je.at("mask_path").get<std::string>();
                e.rgb_pfm = je.at("rgb_pfm").get<std::string>();
                e.albedo_pfm = je.at("albedo_pfm").get<std::string>();
                e.normal_pfm = je.at("normal_pfm").get<std::string>();
                e.mr_pfm = je.at("mr_pfm").get<std::string>();
                obj.entries.push_back(e);
            }
            m.objects.push_back(std::move(obj));
        }
    } catch (const json::exception& e) {
        raise("load_manifest: missing or mistyped field in '" + path + "': " + e.what());
    }

    if (!validate) return m;
    for (const ManifestObject& obj : m.objects) {
        std::set<std::pair<int, int>> grid;
        for (const ManifestEntry& e : obj.entries) {
            std::string owner = obj.object_id + "(v" + std::to_string(e.view_id) + ",l" +
                                std::to_string(e.light_id) + ")";
            for (const std::string* p : {&e.rgb_path, &e.albedo_path, &e.normal_path, &e.mr_path,
                                         &e.mask_path, &e.rgb_pfm, &e.albedo_pfm, &e.normal_pfm,
                                         &e.mr_pfm})
                check_image(m, *p, owner);
            grid.emplace(e.view_id, e.light_id);
        }
        size_t want = obj.views.size() * obj.lights.size();
        if (grid.size() != want || obj.entries.size() != want)
            raise("manifest: object " + obj.object_id + " grid incomplete: " +
                  std::to_string(grid.size()) + " of " + std::to_string(want) + " cells");
    }
    return m;
}

IntrinsicSet load_intrinsics(const DatasetManifest& m, int object, int view_id) {
    const ManifestObject& obj = m.objects.at(object);
    const ManifestEntry* found = nullptr;
    for (const ManifestEntry& e : obj.entries)
        if (e.view_id == view_id) { found = &e; break; }
    require(found != nullptr, "load_intrinsics: view not in manifest");

    IntrinsicSet s;
    s.albedo = load_pfm(m.resolve(found->albedo_pfm));
    s.mask = load_png(m.resolve(found->mask_path));
    Image normal_enc = load_pfm(m.resolve(found->normal_pfm));
    Image mr = load_pfm(m.resolve(found->mr_pfm));
    int w = s.albedo.width, h = s.albedo.height;
    s.normal = Image(w, h, 3, 1.f);
    s.roughness = Image(w, h, 1, 1.f);
    s.metallic = Image(w, h, 1, 1.f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (s.mask.at(x, y, 0) > 0.5f) {
                Vec3 n = decode_normal(normal_enc.pixel(x, y));
                float len = length(n);
                s.normal.set_pixel(x, y, len > 0.f ? n / len : Vec3(0.f, 0.f, 1.f));
            }
            Vec3 m3 = mr.pixel(x, y);
            s.metallic.at(x, y, 0) = m3.x;
            s.roughness.at(x, y, 0) = m3.y;
        }
    return s;
}

Image load_rgb(const DatasetManifest& m, int object, int view_id, int light_id) {
    return load_pfm(m.resolve(m.entry(object, view_id, light_id).rgb_pfm));
}

} // namespace irid
