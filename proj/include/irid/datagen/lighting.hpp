#pragma once

#include <cstdint>
#include <vector>

#include "irid/render/integrators.hpp"

namespace irid {

enum class LightingKind { HdrEnv, TwoPointLights, UniformAmbient };

struct LightingCondition {
    LightingKind kind = LightingKind::HdrEnv;
    EnvironmentMap env;              // HdrEnv only
    std::vector<PointLight> lights;  // TwoPointLights only
    Vec3 ambient{0.f};               // UniformAmbient only

    EnvSource env_source() const {
        EnvSource s;
        if (kind == LightingKind::HdrEnv) s.map = &env;
        else if (kind == LightingKind::UniformAmbient) { s.uniform = true; s.ambient = ambient; }
        return s;
    }
};

// Procedural HDR sky: vertical gradient plus 1-4 bright gaussian blobs with
// peak radiance in [1,20].
EnvironmentMap make_procedural_env(uint64_t seed, int resolution = 32);

// The seven illumination slots of one dataset object: slots 0-5 draw
// environment maps, slot 6 places two point lights on a shell of
// 3-5 scene radii.
LightingCondition sample_lighting(uint64_t seed, int slot, float scene_radius = 1.f);

// One-light-at-a-time condition: a single point light, no ambient.
LightingCondition make_olat(uint64_t seed, int index, float scene_radius);

} // namespace irid
