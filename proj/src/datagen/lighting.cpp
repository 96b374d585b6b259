#include "irid/datagen/lighting.hpp"

#include "irid/core/error.hpp"
#include "irid/math/rng.hpp"

namespace irid {

namespace {

Vec3 random_unit(Pcg32& rng) {
    return normalize(Vec3{rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()});
}

} // namespace

EnvironmentMap make_procedural_env(uint64_t seed, int resolution) {
    Pcg32 rng(seed, 0xE27u);
    Vec3 horizon{rng.uniform(0.1f, 0.7f), rng.uniform(0.1f, 0.7f), rng.uniform(0.1f, 0.7f)};
    Vec3 zenith{rng.uniform(0.1f, 0.9f), rng.uniform(0.1f, 0.9f), rng.uniform(0.1f, 0.9f)};

    struct Blob { Vec3 dir; Vec3 radiance; float inv_sigma2; };
    std::vector<Blob> blobs;
    int k = 1 + static_cast<int>(rng.next_below(4));
    for (int i = 0; i < k; ++i) {
        Blob b;
        b.dir = random_unit(rng);
        float peak = rng.uniform(1.f, 20.f);
        Vec3 tint{rng.uniform(0.6f, 1.f), rng.uniform(0.6f, 1.f), rng.uniform(0.6f, 1.f)};
        b.radiance = tint * (peak / max_component(tint));
        float sigma = rng.uniform(0.12f, 0.5f);
        b.inv_sigma2 = 1.f / (sigma * sigma);
        blobs.push_back(b);
    }

    EnvironmentMap env = make_constant_env(Vec3(0.f), resolution);
    for (int f = 0; f < 6; ++f)
        for (int j = 0; j < resolution; ++j)
            for (int i = 0; i < resolution; ++i) {
                Vec3 d = normalize(face_uv_to_dir(f, (i + 0.5f) / resolution,
                                                  (j + 0.5f) / resolution));
                Vec3 l = lerp(horizon, zenith, 0.5f * (d.y + 1.f));
                for (const Blob& b : blobs) {
                    float ang = std::acos(std::clamp(dot(d, b.dir), -1.f, 1.f));
                    l += b.radiance * std::exp(-ang * ang * b.inv_sigma2);
                }
                env.faces[f].set_pixel(i, j, l);
            }
    return env;
}

LightingCondition sample_lighting(uint64_t seed, int slot, float scene_radius) {
    require(slot >= 0 && slot <= 6, "sample_lighting: slot must be in [0,6]");
    LightingCondition cond;
    if (slot < 6) {
        cond.kind = LightingKind::HdrEnv;
        cond.env = make_procedural_env(mix64(seed ^ (0x11Dull * (slot + 1))));
        return cond;
    }
    cond.kind = LightingKind::TwoPointLights;
    Pcg32 rng(seed, 0x6A57u);
    for (int i = 0; i < 2; ++i) {
        PointLight light;
        float shell = rng.uniform(3.f, 5.f) * scene_radius;
        light.position = random_unit(rng) * shell;
        float power = rng.uniform(15.f, 50.f) * scene_radius * scene_radius;
        Vec3 tint{rng.uniform(0.7f, 1.f), rng.uniform(0.7f, 1.f), rng.uniform(0.7f, 1.f)};
        light.intensity = tint * (power / max_component(tint));
        cond.lights.push_back(light);
    }
    return cond;
}

LightingCondition make_olat(uint64_t seed, int index, float scene_radius) {
    LightingCondition cond;
    cond.kind = LightingKind::TwoPointLights;
    Pcg32 rng(mix64(seed ^ (0x01A7ull * (index + 1))), 0x6A58u);
    PointLight light;
    float shell = rng.uniform(3.f, 5.f) * scene_radius;
    light.position = random_unit(rng) * shell;
    light.intensity = Vec3(rng.uniform(25.f, 45.f) * scene_radius * scene_radius);
    cond.lights.push_back(light);
    return cond;
}

} // namespace irid
