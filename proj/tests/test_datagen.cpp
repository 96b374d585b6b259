#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "irid/core/color.hpp"
#include "irid/core/io.hpp"
#include "irid/datagen/dataset.hpp"
#include "irid/datagen/lighting.hpp"
#include "irid/datagen/scene.hpp"
#include "irid/math/rng.hpp"
#include "irid/render/scene_render.hpp"

using namespace irid;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("irid_datagen_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::vector<char> slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Random points in the shell around the surface where the tracer operates.
Vec3 probe_point(Pcg32& rng, float radius) {
    return Vec3{rng.uniform(-1.f, 1.f), rng.uniform(-1.f, 1.f), rng.uniform(-1.f, 1.f)} *
           (1.2f * radius);
}

} // namespace

TEST_CASE("sample_scene is deterministic") {
    SdfScene a = sample_scene(99);
    SdfScene b = sample_scene(99);
    REQUIRE(a.primitives.size() == b.primitives.size());
    CHECK(a.blend_radius == b.blend_radius);
    Pcg32 rng(7);
    for (int i = 0; i < 200; ++i) {
        Vec3 p = probe_point(rng, a.bounding_radius());
        CHECK(a.sdf(p) == b.sdf(p));
        Vec3 ca, cb;
        float ra, rb, ma, mb;
        a.material_at(p, ca, ra, ma);
        b.material_at(p, cb, rb, mb);
        CHECK(ca.x == cb.x);
        CHECK(ra == rb);
        CHECK(ma == mb);
    }
}

TEST_CASE("scene sdf stays 1-lipschitz over a seed sweep") {
    // Numeric bound: |f(p) - f(q)| <= (1 + tol) |p - q| on random pairs.
    int violations = 0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SdfScene s = sample_scene(seed);
        float radius = s.bounding_radius();
        Pcg32 rng(seed * 31 + 1);
        for (int i = 0; i < 60; ++i) {
            Vec3 p = probe_point(rng, radius);
            Vec3 q = p + Vec3{rng.uniform(-1.f, 1.f), rng.uniform(-1.f, 1.f),
                              rng.uniform(-1.f, 1.f)} *
                             0.05f;
            float lhs = std::fabs(s.sdf(p) - s.sdf(q));
            float rhs = length(p - q) * 1.0005f + 1e-5f;
            if (lhs > rhs) ++violations;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("scene materials are in range and often patterned") {
    int non_constant_albedo = 0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SdfScene s = sample_scene(seed);
        float radius = s.bounding_radius();
        Pcg32 rng(seed + 5000);
        Vec3 first;
        bool varies = false;
        for (int i = 0; i < 64; ++i) {
            Vec3 albedo;
            float rough, metal;
            s.material_at(probe_point(rng, radius), albedo, rough, metal);
            CHECK(albedo.x >= 0.f);
            CHECK(max_component(albedo) <= 1.f);
            CHECK(rough >= 0.f);
            CHECK(rough <= 1.f);
            CHECK(metal >= 0.f);
            CHECK(metal <= 1.f);
            if (i == 0) first = albedo;
            else if (length(albedo - first) > 1e-3f) varies = true;
        }
        if (varies) ++non_constant_albedo;
    }
    CHECK(non_constant_albedo >= 40);
}

TEST_CASE("lighting slots") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        LightingCondition c6 = sample_lighting(seed, 6, 2.f);
        REQUIRE(c6.kind == LightingKind::TwoPointLights);
        REQUIRE(c6.lights.size() == 2);
        for (const PointLight& l : c6.lights) {
            float shell = length(l.position) / 2.f;
            CHECK(shell >= 3.f);
            CHECK(shell <= 5.f);
            CHECK(l.intensity.x > 0.f);
        }
    }
    for (uint64_t seed = 0; seed < 8; ++seed)
        for (int slot = 0; slot < 6; ++slot) {
            LightingCondition c = sample_lighting(seed, slot, 1.f);
            REQUIRE(c.kind == LightingKind::HdrEnv);
            for (const Image& f : c.env.faces)
                for (float v : f.data) CHECK(v >= 0.f);
        }
    // deterministic in (seed, slot)
    LightingCondition x = sample_lighting(4, 2, 1.f);
    LightingCondition y = sample_lighting(4, 2, 1.f);
    CHECK(x.env.faces[0].data == y.env.faces[0].data);
}

TEST_CASE("generate_dataset writes a complete validated grid") {
    TempDir dir("grid");
    GenerateParams gp;
    gp.num_objects = 1;
    gp.n_views = 4;
    gp.n_lights = 7;
    gp.resolution = 16;
    gp.spp = 8;
    gp.seed = 11;
    DatasetManifest made = generate_dataset(gp, dir.str());
    CHECK(made.objects.size() == 1);
    CHECK(made.objects[0].entries.size() == 28);

    // reload with full validation: file existence, sizes, grid completeness
    DatasetManifest m = load_manifest(dir.str() + "/manifest.json");
    REQUIRE(m.objects.size() == 1);
    const ManifestObject& obj = m.objects[0];
    CHECK(obj.views.size() == 4);
    CHECK(obj.lights.size() == 7);
    CHECK(obj.entries.size() == 28);
    CHECK(obj.lights[6].kind == "two_point");
    CHECK(obj.lights[6].positions.size() == 2);
    for (int l = 0; l < 6; ++l) CHECK(obj.lights[l].kind == "hdr_env");

    // lighting invariance by construction: all lights of a view share files
    for (int v = 0; v < 4; ++v) {
        const ManifestEntry& first = m.entry(0, v, 0);
        for (int l = 1; l < 7; ++l) {
            const ManifestEntry& e = m.entry(0, v, l);
            CHECK(e.albedo_pfm == first.albedo_pfm);
            CHECK(e.normal_pfm == first.normal_pfm);
            CHECK(e.mr_pfm == first.mr_pfm);
            CHECK(e.mask_path == first.mask_path);
            CHECK(e.rgb_pfm != first.rgb_pfm);
        }
    }

    IntrinsicSet s = load_intrinsics(m, 0, 0);
    s.validate();
    CHECK(s.width() == 16);
    Image rgb = load_rgb(m, 0, 0, 6);
    CHECK(rgb.width == 16);
    CHECK(rgb.channels == 3);
    for (float v : rgb.data) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
}

TEST_CASE("generate_dataset is bit-reproducible") {
    GenerateParams gp;
    gp.num_objects = 1;
    gp.n_views = 2;
    gp.n_lights = 2;
    gp.resolution = 16;
    gp.spp = 4;
    gp.seed = 77;
    TempDir da("repro_a"), db("repro_b");
    generate_dataset(gp, da.str());
    generate_dataset(gp, db.str());
    int files = 0;
    for (const auto& ent : fs::recursive_directory_iterator(da.path)) {
        if (!ent.is_regular_file()) continue;
        fs::path rel = fs::relative(ent.path(), da.path);
        CAPTURE(rel.string());
        REQUIRE(fs::exists(db.path / rel));
        CHECK(slurp(ent.path().string()) == slurp((db.path / rel).string()));
        ++files;
    }
    // 2 views x 2 lights x (png+pfm rgb) + 2 views x (4 png + 3 pfm) + manifest
    CHECK(files == 2 * 2 * 2 + 2 * 7 + 1);
}

TEST_CASE("rendered albedo equals direct field queries at hit points") {
    TempDir dir("oracle");
    GenerateParams gp;
    gp.num_objects = 1;
    gp.n_views = 1;
    gp.n_lights = 1;
    gp.resolution = 32;
    gp.spp = 4;
    gp.seed = 3;
    generate_dataset(gp, dir.str());
    DatasetManifest m = load_manifest(dir.str() + "/manifest.json");
    IntrinsicSet s = load_intrinsics(m, 0, 0);

    SdfScene scene = sample_scene(m.objects[0].scene_seed);
    const Camera& cam = m.objects[0].views[0];
    float radius = scene.bounding_radius();
    float eps = std::max(1e-4f, 5e-4f * radius);
    int fg = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            Ray ray = cam.pixel_ray(x, y);
            float max_t = length(cam.position) + 4.f * radius;
            float t = scene.trace(ray.origin, ray.dir, max_t, eps);
            CHECK((t > 0.f) == s.foreground(x, y));
            if (t <= 0.f) continue;
            ++fg;
            Vec3 albedo;
            float rough, metal;
            scene.material_at(ray.origin + ray.dir * t, albedo, rough, metal);
            // stored PFM is float-exact; camera serialization round-trips
            // through decimal JSON, so allow a whisker on the hit point
            CHECK(length(s.albedo.pixel(x, y) - albedo) < 2e-3f);
            CHECK(s.metallic.at(x, y, 0) == doctest::Approx(metal).epsilon(2e-3));
            CHECK(s.roughness.at(x, y, 0) == doctest::Approx(rough).epsilon(2e-3));
        }
    CHECK(fg > 50);  // object occupies a sensible part of the frame
}

TEST_CASE("generate_dataset flags partial output when a write fails") {
    TempDir dir("partial");
    // occupy the object directory name with a plain file
    std::ofstream(dir.path / "obj00").put('x');
    GenerateParams gp;
    gp.num_objects = 1;
    gp.n_views = 1;
    gp.n_lights = 1;
    gp.resolution = 16;
    gp.spp = 1;
    CHECK_THROWS(generate_dataset(gp, dir.str()));
    DatasetManifest m = load_manifest(dir.str() + "/manifest.json", /*validate=*/false);
    CHECK(m.partial);
    CHECK(!m.error.empty());
}
