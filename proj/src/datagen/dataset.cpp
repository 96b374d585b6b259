#include "irid/datagen/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "irid/core/color.hpp"
#include "irid/core/error.hpp"
#include "irid/core/io.hpp"
#include "irid/datagen/lighting.hpp"
#include "irid/datagen/scene.hpp"
#include "irid/math/rng.hpp"
#include "irid/render/scene_render.hpp"

namespace irid {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::string id2(const char* prefix, int v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%02d", prefix, v);
    return buf;
}

Image quantize_preview(const Image& img, bool srgb) {
    Image out(img.width, img.height, img.channels);
    for (size_t i = 0; i < img.data.size(); ++i) {
        float v = std::clamp(img.data[i], 0.f, 1.f);
        out.data[i] = srgb ? srgb_encode(v) : v;
    }
    return out;
}

Image tonemap_image(const Image& hdr) {
    Image out(hdr.width, hdr.height, hdr.channels);
    for (size_t i = 0; i < hdr.data.size(); ++i) out.data[i] = tonemap(hdr.data[i]);
    return out;
}

} // namespace

std::vector<Camera> sample_views(uint64_t seed, int n_views, int resolution, float scene_radius) {
    Pcg32 rng(seed, 0xCA3);
    float phase = rng.uniform(0.f, kTwoPi);
    float dist = 3.8f * scene_radius;
    std::vector<Camera> views;
    views.reserve(n_views);
    for (int i = 0; i < n_views; ++i) {
        float az = phase + kTwoPi * i / n_views;
        float elev = radians(rng.uniform(-10.f, 45.f));
        Camera cam;
        cam.position = Vec3{std::cos(elev) * std::cos(az), std::sin(elev),
                            std::cos(elev) * std::sin(az)} *
                       dist;
        cam.look_at = Vec3(0.f);
        cam.up = Vec3{0.f, 1.f, 0.f};
        cam.vfov_rad = radians(40.f);
        cam.width = resolution;
        cam.height = resolution;
        cam.validate();
        views.push_back(cam);
    }
    return views;
}

DatasetManifest generate_dataset(const GenerateParams& params, const std::string& out_dir) {
    require(params.num_objects >= 1, "generate_dataset: need at least one object");
    require(params.n_views >= 1, "generate_dataset: n_views must be >= 1");
    require(params.n_lights >= 1 && params.n_lights <= 7,
            "generate_dataset: n_lights must be in [1,7]");
    require(params.resolution >= 8 && params.resolution <= 512 &&
                (params.resolution & (params.resolution - 1)) == 0,
            "generate_dataset: resolution must be a power of two in [8,512]");

    std::filesystem::create_directories(out_dir);
    DatasetManifest m;
    m.resolution = params.resolution;
    m.root = out_dir;
    std::string manifest_path = (std::filesystem::path(out_dir) / "manifest.json").string();

    try {
        for (int k = 0; k < params.num_objects; ++k) {
            ManifestObject obj;
            obj.object_id = id2("obj", k);
            obj.scene_seed = mix64(params.seed + kGolden * (uint64_t(k) + 1));
            std::filesystem::create_directories(std::filesystem::path(out_dir) / obj.object_id);

            SdfScene scene = sample_scene(obj.scene_seed);
            float radius = scene.bounding_radius();
            obj.views = sample_views(mix64(obj.scene_seed ^ 0x5EEDull), params.n_views,
                                     params.resolution, radius);

            uint64_t light_seed = mix64(obj.scene_seed ^ 0x11dULL);
            std::vector<LightingCondition> conditions;
            for (int l = 0; l < params.n_lights; ++l) {
                LightingCondition cond = sample_lighting(light_seed, l, radius);
                LightRecord rec;
                rec.light_id = l;
                rec.slot = l;
                rec.seed = light_seed;
                rec.kind = cond.kind == LightingKind::TwoPointLights ? "two_point" : "hdr_env";
                for (const PointLight& pl : cond.lights) {
                    rec.positions.push_back(pl.position);
                    rec.intensities.push_back(pl.intensity);
                }
                obj.lights.push_back(rec);
                conditions.push_back(std::move(cond));
            }

            for (int v = 0; v < params.n_views; ++v) {
                std::string base = obj.object_id + "/" + id2("v", v);
                std::string albedo_png = base + "_albedo.png", albedo_pfm = base + "_albedo.pfm";
                std::string normal_png = base + "_normal.png", normal_pfm = base + "_normal.pfm";
                std::string mr_png = base + "_mr.png", mr_pfm = base + "_mr.pfm";
                std::string mask_png = base + "_mask.png";

                for (int l = 0; l < params.n_lights; ++l) {
                    uint64_t rseed = mix64(obj.scene_seed ^ (uint64_t(v) * 131 + l + 7));
                    ViewRender rv = render_view(scene, obj.views[v], conditions[l], params.spp,
                                                rseed, params.threads);
                    Image ldr = tonemap_image(rv.hdr);
                    std::string rgb_base = base + "_" + id2("l", l) + "_rgb";

                    ManifestEntry e;
                    e.view_id = v;
                    e.light_id = l;
                    e.rgb_path = rgb_base + ".png";
                    e.rgb_pfm = rgb_base + ".pfm";
                    e.albedo_path = albedo_png;
                    e.albedo_pfm = albedo_pfm;
                    e.normal_path = normal_png;
                    e.normal_pfm = normal_pfm;
                    e.mr_path = mr_png;
                    e.mr_pfm = mr_pfm;
                    e.mask_path = mask_png;
                    save_png(m.resolve(e.rgb_path), ldr);
                    save_pfm(m.resolve(e.rgb_pfm), ldr);

                    // Intrinsics are lighting-invariant; store them once and
                    // point every light entry of this view at the same files.
                    if (l == 0) {
                        auto trip = to_triplets(rv.intrinsics);
                        save_pfm(m.resolve(albedo_pfm), trip[0].data);
                        save_pfm(m.resolve(normal_pfm), trip[1].data);
                        save_pfm(m.resolve(mr_pfm), trip[2].data);
                        save_png(m.resolve(albedo_png), quantize_preview(trip[0].data, true));
                        save_png(m.resolve(normal_png), quantize_preview(trip[1].data, false));
                        save_png(m.resolve(mr_png), quantize_preview(trip[2].data, false));
                        save_png(m.resolve(mask_png), rv.intrinsics.mask);
                    }
                    obj.entries.push_back(std::move(e));
                }
            }
            m.objects.push_back(std::move(obj));
        }
    } catch (const std::exception& e) {
        m.partial = true;
        m.error = e.what();
        try {
            save_manifest(m, manifest_path);
        } catch (...) {
            // the partial marker is best-effort; the original error wins
        }
        throw;
    }

    save_manifest(m, manifest_path);
    return m;
}

} // namespace irid
