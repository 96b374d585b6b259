#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "irid/core/color.hpp"
#include "irid/core/io.hpp"
#include "irid/core/manifest.hpp"
#include "irid/core/types.hpp"
#include "irid/math/rng.hpp"

using namespace irid;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Image random_image(int w, int h, int c, uint64_t seed) {
    Pcg32 rng(seed);
    Image img(w, h, c);
    for (float& v : img.data) v = rng.next_float();
    return img;
}

IntrinsicSet make_test_set(int w, int h) {
    IntrinsicSet s;
    s.albedo = Image(w, h, 3, 1.f);
    s.normal = Image(w, h, 3, 1.f);
    s.roughness = Image(w, h, 1, 1.f);
    s.metallic = Image(w, h, 1, 1.f);
    s.mask = Image(w, h, 1, 0.f);
    Pcg32 rng(5);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if ((x + y) % 3 == 0) continue;  // keep some background pixels
            s.mask.at(x, y, 0) = 1.f;
            s.albedo.set_pixel(x, y, {rng.next_float(), rng.next_float(), rng.next_float()});
            Vec3 n = normalize(Vec3{rng.next_float() - 0.5f, rng.next_float() - 0.5f,
                                    rng.next_float() + 0.5f});
            s.normal.set_pixel(x, y, n);
            s.roughness.at(x, y, 0) = rng.next_float();
            s.metallic.at(x, y, 0) = rng.next_float();
        }
    return s;
}

} // namespace

TEST_CASE("srgb tonemap pinned values") {
    CHECK(tonemap(0.f) == 0.f);
    CHECK(tonemap(1.f) == 1.f);
    CHECK(tonemap(2.5f) == 1.f);                               // clamp above 1
    CHECK(tonemap(0.5f) == doctest::Approx(0.735357f).epsilon(1e-4));
    CHECK(tonemap(0.001f) == doctest::Approx(0.01292f).epsilon(1e-4));  // linear toe
    CHECK_THROWS_AS(tonemap(std::nanf("")), Error);
}

TEST_CASE("tonemap is monotone on [0, inf)") {
    Pcg32 rng(1);
    for (int i = 0; i < 1000; ++i) {
        float a = rng.next_float() * 3.f;
        float b = a + rng.next_float();
        CHECK(tonemap(a) <= tonemap(b));
    }
}

TEST_CASE("srgb transfer round trip") {
    Pcg32 rng(2);
    for (int i = 0; i < 1000; ++i) {
        float x = rng.next_float();
        CHECK(srgb_decode(srgb_encode(x)) == doctest::Approx(x).epsilon(1e-5));
    }
}

TEST_CASE("normal encoding axis cases and bijection") {
    Vec3 e1 = encode_normal({0.f, 0.f, 1.f});
    CHECK(e1.x == doctest::Approx(0.5f));
    CHECK(e1.y == doctest::Approx(0.5f));
    CHECK(e1.z == doctest::Approx(1.0f));
    Vec3 e2 = encode_normal({1.f, 0.f, 0.f});
    CHECK(e2.x == doctest::Approx(1.0f));
    CHECK(e2.y == doctest::Approx(0.5f));
    CHECK(e2.z == doctest::Approx(0.5f));
    Vec3 e3 = encode_normal({0.5774f, 0.5774f, 0.5774f});
    CHECK(e3.x == doctest::Approx(0.7887f).epsilon(1e-4));

    Pcg32 rng(4);
    for (int i = 0; i < 500; ++i) {
        Vec3 n = normalize(Vec3{rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()});
        Vec3 back = decode_normal(encode_normal(n));
        CHECK(length(back - n) < 1e-6f);
    }
    CHECK_THROWS_AS(encode_normal({1.f, 1.f, 1.f}), Error);
}

TEST_CASE("png round trip is exact at 8 bits") {
    fs::path dir = temp_dir("irid_test_png");
    Image img = random_image(17, 9, 3, 77);
    std::string p = (dir / "t.png").string();
    save_png(p, img);
    Image back = load_png(p);
    REQUIRE(back.width == 17);
    REQUIRE(back.height == 9);
    REQUIRE(back.channels == 3);
    for (size_t i = 0; i < img.data.size(); ++i) {
        float q = std::round(img.data[i] * 255.f) / 255.f;
        CHECK(back.data[i] == doctest::Approx(q).epsilon(1e-6));
    }

    Image gray = random_image(5, 4, 1, 78);
    std::string pg = (dir / "g.png").string();
    save_png(pg, gray);
    CHECK(load_png(pg).channels == 1);
}

TEST_CASE("pfm round trip is bit exact") {
    fs::path dir = temp_dir("irid_test_pfm");
    Image img = random_image(13, 6, 3, 99);
    img.data[0] = 1234.5678f;  // HDR values allowed
    std::string p = (dir / "t.pfm").string();
    save_pfm(p, img);
    Image back = load_pfm(p);
    REQUIRE(back.same_shape(img));
    for (size_t i = 0; i < img.data.size(); ++i) CHECK(back.data[i] == img.data[i]);

    Image gray = random_image(3, 8, 1, 100);
    std::string pg = (dir / "g.pfm").string();
    save_pfm(pg, gray);
    Image gback = load_pfm(pg);
    REQUIRE(gback.channels == 1);
    for (size_t i = 0; i < gray.data.size(); ++i) CHECK(gback.data[i] == gray.data[i]);
}

TEST_CASE("image size probe") {
    fs::path dir = temp_dir("irid_test_probe");
    save_png((dir / "a.png").string(), Image(21, 13, 3, 0.5f));
    save_pfm((dir / "a.pfm").string(), Image(11, 29, 1, 0.5f));
    auto [pw, ph] = probe_image_size((dir / "a.png").string());
    CHECK(pw == 21);
    CHECK(ph == 13);
    auto [fw, fh] = probe_image_size((dir / "a.pfm").string());
    CHECK(fw == 11);
    CHECK(fh == 29);
}

TEST_CASE("camera basis and center ray") {
    Camera cam;
    cam.position = {0.f, 0.f, 3.f};
    cam.look_at = {0.f, 0.f, 0.f};
    cam.width = cam.height = 64;
    cam.validate();
    Ray r = cam.pixel_ray(31, 31, 1.f, 1.f);  // exact image center
    CHECK(length(r.dir - Vec3{0.f, 0.f, -1.f}) < 1e-6f);
    // A world direction pointing at the camera maps to +z in camera space.
    Vec3 n_cam = cam.to_camera_dir({0.f, 0.f, 1.f});
    CHECK(length(n_cam - Vec3{0.f, 0.f, 1.f}) < 1e-6f);

    Camera bad = cam;
    bad.up = {0.f, 0.f, 1.f};
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("triplet packing conventions") {
    IntrinsicSet s = make_test_set(8, 8);
    s.validate();
    auto trips = to_triplets(s);
    CHECK(trips[0].kind == TripletKind::Albedo);
    CHECK(trips[1].kind == TripletKind::Normal);
    CHECK(trips[2].kind == TripletKind::MetallicRoughness);

    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            CHECK(trips[2].data.at(x, y, 2) == 0.f);  // spare channel exactly zero
            if (s.foreground(x, y)) {
                Vec3 enc = trips[1].data.pixel(x, y);
                Vec3 n = decode_normal(enc);
                CHECK(length(n - s.normal.pixel(x, y)) < 1e-6f);
                CHECK(trips[2].data.at(x, y, 0) == s.metallic.at(x, y, 0));
                CHECK(trips[2].data.at(x, y, 1) == s.roughness.at(x, y, 0));
            } else {
                CHECK(trips[0].data.at(x, y, 0) == 1.f);
                CHECK(trips[1].data.at(x, y, 0) == 1.f);
                CHECK(trips[2].data.at(x, y, 0) == 1.f);
                CHECK(trips[2].data.at(x, y, 1) == 1.f);
            }
        }

    // Spare channel survives a storage round trip exactly.
    fs::path dir = temp_dir("irid_test_trip");
    std::string p = (dir / "mr.pfm").string();
    save_pfm(p, trips[2].data);
    Image back = load_pfm(p);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) CHECK(back.at(x, y, 2) == 0.f);

    IntrinsicSet rec = from_triplets(trips);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            if (s.foreground(x, y)) {
                CHECK(length(rec.normal.pixel(x, y) - s.normal.pixel(x, y)) < 1e-5f);
                CHECK(rec.metallic.at(x, y, 0) == doctest::Approx(s.metallic.at(x, y, 0)));
                CHECK(rec.roughness.at(x, y, 0) == doctest::Approx(s.roughness.at(x, y, 0)));
            }
}

namespace {

// Writes a consistent dataset directory (images + manifest) for manifest tests.
DatasetManifest write_fake_dataset(const fs::path& dir, int n_views, int n_lights, int res) {
    DatasetManifest m;
    m.resolution = res;
    ManifestObject obj;
    obj.object_id = "obj0000";
    obj.scene_seed = 1234;
    fs::create_directories(dir / obj.object_id);
    for (int v = 0; v < n_views; ++v) {
        Camera cam;
        cam.position = {0.f, 0.f, 3.f};
        cam.look_at = {0.f, 0.f, 0.f};
        cam.width = cam.height = res;
        obj.views.push_back(cam);
    }
    for (int l = 0; l < n_lights; ++l) {
        LightRecord rec;
        rec.light_id = l;
        rec.slot = l;
        rec.seed = 100 + l;
        rec.kind = l == 6 ? "two_point" : "hdr_env";
        if (l == 6) {
            rec.positions = {{3.f, 0.f, 0.f}, {0.f, 3.f, 0.f}};
            rec.intensities = {{30.f, 30.f, 30.f}, {10.f, 20.f, 30.f}};
        }
        obj.lights.push_back(rec);
    }
    Image img(res, res, 3, 0.25f);
    Image gray(res, res, 1, 1.f);
    for (int v = 0; v < n_views; ++v) {
        std::string base = obj.object_id + "/v" + std::to_string(v);
        save_png(dir.string() + "/" + base + "_albedo.png", img);
        save_png(dir.string() + "/" + base + "_normal.png", img);
        save_png(dir.string() + "/" + base + "_mr.png", img);
        save_png(dir.string() + "/" + base + "_mask.png", gray);
        save_pfm(dir.string() + "/" + base + "_albedo.pfm", img);
        save_pfm(dir.string() + "/" + base + "_normal.pfm", img);
        save_pfm(dir.string() + "/" + base + "_mr.pfm", img);
        for (int l = 0; l < n_lights; ++l) {
            std::string rb = base + "_l" + std::to_string(l) + "_rgb";
            save_png(dir.string() + "/" + rb + ".png", img);
            save_pfm(dir.string() + "/" + rb + ".pfm", img);
            ManifestEntry e;
            e.view_id = v;
            e.light_id = l;
            e.rgb_path = rb + ".png";
            e.rgb_pfm = rb + ".pfm";
            e.albedo_path = base + "_albedo.png";
            e.albedo_pfm = base + "_albedo.pfm";
            e.normal_path = base + "_normal.png";
            e.normal_pfm = base + "_normal.pfm";
            e.mr_path = base + "_mr.png";
            e.mr_pfm = base + "_mr.pfm";
            e.mask_path = base + "_mask.png";
            obj.entries.push_back(e);
        }
    }
    m.objects.push_back(obj);
    save_manifest(m, (dir / "manifest.json").string());
    return m;
}

} // namespace

TEST_CASE("manifest round trip and validation") {
    SUBCASE("empty manifest round-trips") {
        fs::path dir = temp_dir("irid_test_m0");
        DatasetManifest m;
        m.resolution = 64;
        save_manifest(m, (dir / "manifest.json").string());
        DatasetManifest back = load_manifest((dir / "manifest.json").string());
        CHECK(back.resolution == 64);
        CHECK(back.objects.empty());
    }

    SUBCASE("12 views x 7 lights gives 84 validated entries") {
        fs::path dir = temp_dir("irid_test_m1");
        write_fake_dataset(dir, 12, 7, 4);
        DatasetManifest back = load_manifest((dir / "manifest.json").string());
        REQUIRE(back.objects.size() == 1);
        CHECK(back.objects[0].entries.size() == 84);
        CHECK(back.objects[0].views.size() == 12);
        CHECK(back.objects[0].lights.size() == 7);
        CHECK(back.objects[0].lights[6].kind == "two_point");
        CHECK(back.objects[0].lights[6].positions.size() == 2);

        // Field-for-field round trip through a second save/load.
        save_manifest(back, (dir / "manifest2.json").string());
        DatasetManifest b2 = load_manifest((dir / "manifest2.json").string(), false);
        CHECK(b2.objects[0].entries.size() == 84);
        CHECK(b2.objects[0].scene_seed == back.objects[0].scene_seed);
        CHECK(b2.objects[0].views[3].position.z == back.objects[0].views[3].position.z);
        CHECK(b2.objects[0].entries[10].rgb_path == back.objects[0].entries[10].rgb_path);
    }

    SUBCASE("missing referenced file is named in the error") {
        fs::path dir = temp_dir("irid_test_m2");
        write_fake_dataset(dir, 2, 2, 4);
        fs::remove(dir / "obj0000/v1_l0_rgb.png");
        try {
            load_manifest((dir / "manifest.json").string());
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("v1_l0_rgb.png") != std::string::npos);
        }
    }

    SUBCASE("resolution mismatch rejected") {
        fs::path dir = temp_dir("irid_test_m3");
        write_fake_dataset(dir, 1, 1, 4);
        save_png((dir / "obj0000/v0_l0_rgb.png").string(), Image(8, 8, 3, 0.f));
        CHECK_THROWS_AS(load_manifest((dir / "manifest.json").string()), Error);
    }

    SUBCASE("incomplete grid rejected") {
        fs::path dir = temp_dir("irid_test_m4");
        DatasetManifest m = write_fake_dataset(dir, 2, 2, 4);
        m.objects[0].entries.pop_back();
        save_manifest(m, (dir / "manifest.json").string());
        CHECK_THROWS_AS(load_manifest((dir / "manifest.json").string()), Error);
    }

    SUBCASE("malformed json rejected") {
        fs::path dir = temp_dir("irid_test_m5");
        std::ofstream((dir / "manifest.json").string()) << "{ not json";
        CHECK_THROWS_AS(load_manifest((dir / "manifest.json").string()), Error);
    }
}
