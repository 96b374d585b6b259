#pragma once

#include <cstdint>
#include <vector>

#include "irid/math/mat3.hpp"
#include "irid/math/vec3.hpp"

namespace irid {

enum class PrimShape { Sphere, Box, Torus, Capsule };

struct Primitive {
    PrimShape shape = PrimShape::Sphere;
    Vec3 center;
    Mat3 world_to_local;       // rotation only
    Vec3 size;                 // sphere: (r,-,-); box: half extents;
                               // torus: (major,minor,-); capsule: (half len, r,-)
    int material = 0;

    float distance(const Vec3& p_world) const;
    float bound_radius() const;  // radius of a sphere containing the primitive
};

enum class FieldKind { Constant, Checker, Stripes, HashNoise, Polka };

// Procedural scalar pattern over world points, always in [lo, hi] <= [0,1].
struct ScalarField {
    FieldKind kind = FieldKind::Constant;
    float lo = 0.f, hi = 1.f;
    float scale = 1.f;
    Vec3 axis{0.f, 1.f, 0.f};
    uint64_t cell_seed = 0;

    float eval(const Vec3& p) const;
};

// Same patterns, blending two colors.
struct ColorField {
    FieldKind kind = FieldKind::Constant;
    Vec3 color_a{0.5f, 0.5f, 0.5f}, color_b{0.5f, 0.5f, 0.5f};
    float scale = 1.f;
    Vec3 axis{0.f, 1.f, 0.f};
    uint64_t cell_seed = 0;

    Vec3 eval(const Vec3& p) const;
};

struct SurfaceMaterial {
    ColorField albedo;
    ScalarField roughness;
    ScalarField metallic;
};

// Smooth-union of a few rigidly-placed primitives with per-primitive
// procedural materials. The blended SDF stays 1-Lipschitz, so sphere
// tracing with unit step scale converges.
struct SdfScene {
    std::vector<Primitive> primitives;
    std::vector<SurfaceMaterial> materials;
    float blend_radius = 0.15f;

    float sdf(const Vec3& p) const;
    Vec3 sdf_gradient(const Vec3& p) const;  // central differences, unnormalized
    int nearest_primitive(const Vec3& p) const;
    void material_at(const Vec3& p, Vec3& albedo, float& roughness, float& metallic) const;
    float bounding_radius() const;

    // Sphere-trace from origin along unit dir; returns hit parameter t or a
    // negative value on miss.
    float trace(const Vec3& origin, const Vec3& dir, float max_t, float eps) const;
    bool occluded(const Vec3& point, const Vec3& dir, float max_dist) const;
};

// Deterministic procedural scene: 1-4 blended primitives, randomized rigid
// placement, patterned or constant material fields.
SdfScene sample_scene(uint64_t seed);

} // namespace irid
