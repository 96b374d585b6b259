#pragma once

#include <functional>
#include <vector>

#include "irid/math/rng.hpp"
#include "irid/render/brdf.hpp"
#include "irid/render/env.hpp"

namespace irid {

struct PointLight {
    Vec3 position;
    Vec3 intensity;  // radiant intensity, inverse-square falloff
};

// Distant radiance source for the hemisphere integral: either a cube map or a
// uniform ambient level (or darkness when neither is set).
struct EnvSource {
    const EnvironmentMap* map = nullptr;
    Vec3 ambient{0.f};
    bool uniform = false;

    Vec3 radiance(const Vec3& dir) const {
        if (map) return map->eval(dir);
        return uniform ? ambient : Vec3(0.f);
    }
    bool black() const { return !map && !uniform; }
};

// Predicate deciding whether a shadow ray from `origin` toward `dir` is blocked
// before `max_dist`. Null means no occlusion anywhere.
using Occluder = std::function<bool(const Vec3& origin, const Vec3& dir, float max_dist)>;

// Unbiased one-bounce estimate of the rendering equation at a surface point:
// cosine + GGX multiple importance sampling over the environment plus exact
// next-event point-light terms (shadow-tested through `occluder`).
Vec3 render_mc(const Vec3& point, const Vec3& n, const Vec3& v, const BrdfParams& params,
               const EnvSource& env, const std::vector<PointLight>& point_lights, int spp,
               Pcg32& rng, const Occluder& occluder = nullptr);

// Split-sum shading: prefiltered-environment specular with the (scale, bias)
// BRDF table, irradiance-map diffuse, and unshadowed point-light terms.
Vec3 render_splitsum(const Vec3& n, const Vec3& v, const BrdfParams& params,
                     const EnvironmentMap& env,
                     const std::vector<PointLight>& point_lights = {},
                     const Vec3& point = Vec3(0.f));

} // namespace irid
