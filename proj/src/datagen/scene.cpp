#include "irid/datagen/scene.hpp"

#include <cmath>

#include "irid/core/error.hpp"
#include "irid/math/rng.hpp"

namespace irid {

namespace {

float sd_sphere(const Vec3& p, float r) { return length(p) - r; }

float sd_box(const Vec3& p, const Vec3& b) {
    Vec3 q = abs(p) - b;
    return length(max(q, Vec3(0.f))) + std::min(max_component(q), 0.f);
}

float sd_torus(const Vec3& p, float major, float minor) {
    float qx = std::sqrt(p.x * p.x + p.z * p.z) - major;
    return std::sqrt(qx * qx + p.y * p.y) - minor;
}

float sd_capsule(const Vec3& p, float half_len, float r) {
    Vec3 q = p;
    q.y -= std::clamp(q.y, -half_len, half_len);
    return length(q) - r;
}

// Polynomial smooth minimum; a convex combination of its inputs minus a
// bounded bump, so the union of 1-Lipschitz fields stays 1-Lipschitz.
float smooth_min(float d1, float d2, float k) {
    float h = std::clamp(0.5f + 0.5f * (d2 - d1) / k, 0.f, 1.f);
    return d2 + (d1 - d2) * h - k * h * (1.f - h);
}

float hash01(uint64_t x) { return static_cast<float>(mix64(x) >> 40) * 0x1p-24f; }

uint64_t cell_key(int ix, int iy, int iz, uint64_t seed) {
    return mix64(seed ^ mix64(static_cast<uint64_t>(static_cast<int64_t>(ix)) * 0x9E3779B1u ^
                              mix64(static_cast<uint64_t>(static_cast<int64_t>(iy)) ^
                                    mix64(static_cast<uint64_t>(static_cast<int64_t>(iz))))));
}

// Smooth trilinear value noise in [0,1].
float value_noise(const Vec3& p, uint64_t seed) {
    int ix = static_cast<int>(std::floor(p.x)), iy = static_cast<int>(std::floor(p.y)),
        iz = static_cast<int>(std::floor(p.z));
    float fx = p.x - ix, fy = p.y - iy, fz = p.z - iz;
    auto fade = [](float t) { return t * t * (3.f - 2.f * t); };
    fx = fade(fx); fy = fade(fy); fz = fade(fz);
    float c[2][2][2];
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
                c[dz][dy][dx] = hash01(cell_key(ix + dx, iy + dy, iz + dz, seed));
    auto mix = [](float a, float b, float t) { return a + (b - a) * t; };
    float x00 = mix(c[0][0][0], c[0][0][1], fx), x10 = mix(c[0][1][0], c[0][1][1], fx);
    float x01 = mix(c[1][0][0], c[1][0][1], fx), x11 = mix(c[1][1][0], c[1][1][1], fx);
    return mix(mix(x00, x10, fy), mix(x01, x11, fy), fz);
}

// Pattern weight in [0,1] shared by the scalar and color fields.
float pattern_weight(FieldKind kind, const Vec3& p, float scale, const Vec3& axis,
                     uint64_t cell_seed) {
    switch (kind) {
        case FieldKind::Constant:
            return 0.f;
        case FieldKind::Checker: {
            Vec3 q = p * scale;
            int s = static_cast<int>(std::floor(q.x)) + static_cast<int>(std::floor(q.y)) +
                    static_cast<int>(std::floor(q.z));
            return (s & 1) ? 1.f : 0.f;
        }
        case FieldKind::Stripes: {
            float t = dot(p, axis) * scale;
            return (static_cast<int>(std::floor(t)) & 1) ? 1.f : 0.f;
        }
        case FieldKind::HashNoise:
            return value_noise(p * scale, cell_seed);
        case FieldKind::Polka: {
            Vec3 q = p * scale;
            Vec3 cell{std::floor(q.x), std::floor(q.y), std::floor(q.z)};
            Vec3 frac = q - cell;
            return length(frac - Vec3(0.5f)) < 0.32f ? 1.f : 0.f;
        }
    }
    return 0.f;
}

} // namespace

float Primitive::distance(const Vec3& p_world) const {
    Vec3 p = world_to_local * (p_world - center);
    switch (shape) {
        case PrimShape::Sphere: return sd_sphere(p, size.x);
        case PrimShape::Box: return sd_box(p, size);
        case PrimShape::Torus: return sd_torus(p, size.x, size.y);
        case PrimShape::Capsule: return sd_capsule(p, size.x, size.y);
    }
    return 1e9f;
}

float Primitive::bound_radius() const {
    switch (shape) {
        case PrimShape::Sphere: return size.x;
        case PrimShape::Box: return length(size);
        case PrimShape::Torus: return size.x + size.y;
        case PrimShape::Capsule: return size.x + size.y;
    }
    return 0.f;
}

float ScalarField::eval(const Vec3& p) const {
    float w = pattern_weight(kind, p, scale, axis, cell_seed);
    return std::clamp(lo + (hi - lo) * w, 0.f, 1.f);
}

Vec3 ColorField::eval(const Vec3& p) const {
    float w = pattern_weight(kind, p, scale, axis, cell_seed);
    return clamp(lerp(color_a, color_b, w), 0.f, 1.f);
}

float SdfScene::sdf(const Vec3& p) const {
    float d = primitives[0].distance(p);
    for (size_t i = 1; i < primitives.size(); ++i)
        d = smooth_min(d, primitives[i].distance(p), blend_radius);
    return d;
}

Vec3 SdfScene::sdf_gradient(const Vec3& p) const {
    const float h = 5e-4f;
    return {sdf({p.x + h, p.y, p.z}) - sdf({p.x - h, p.y, p.z}),
            sdf({p.x, p.y + h, p.z}) - sdf({p.x, p.y - h, p.z}),
            sdf({p.x, p.y, p.z + h}) - sdf({p.x, p.y, p.z - h})};
}

int SdfScene::nearest_primitive(const Vec3& p) const {
    int best = 0;
    float best_d = primitives[0].distance(p);
    for (size_t i = 1; i < primitives.size(); ++i) {
        float d = primitives[i].distance(p);
        if (d < best_d) { best_d = d; best = static_cast<int>(i); }
    }
    return best;
}

void SdfScene::material_at(const Vec3& p, Vec3& albedo, float& roughness,
                           float& metallic) const {
    const SurfaceMaterial& m = materials[primitives[nearest_primitive(p)].material];
    albedo = m.albedo.eval(p);
    roughness = m.roughness.eval(p);
    metallic = m.metallic.eval(p);
}

float SdfScene::bounding_radius() const {
    float r = 0.f;
    for (const Primitive& prim : primitives)
        r = std::max(r, length(prim.center) + prim.bound_radius());
    return r + blend_radius;
}

float SdfScene::trace(const Vec3& origin, const Vec3& dir, float max_t, float eps) const {
    float t = 0.f;
    for (int i = 0; i < 256 && t < max_t; ++i) {
        float d = sdf(origin + dir * t);
        if (d < eps) return t;
        t += d;
    }
    return -1.f;
}

bool SdfScene::occluded(const Vec3& point, const Vec3& dir, float max_dist) const {
    float eps = 1e-3f;
    Vec3 origin = point + dir * (4.f * eps);
    float t = trace(origin, dir, max_dist - 8.f * eps, eps);
    return t >= 0.f;
}

SdfScene sample_scene(uint64_t seed) {
    Pcg32 rng(seed, 0x5ce9e);
    SdfScene scene;
    scene.blend_radius = rng.uniform(0.08f, 0.22f);

    int count = 1 + static_cast<int>(rng.next_below(4));
    bool force_pattern = rng.next_float() < 0.7f;  // >= one non-constant albedo field
    for (int i = 0; i < count; ++i) {
        Primitive prim;
        prim.shape = static_cast<PrimShape>(rng.next_below(4));
        prim.center = count == 1 ? Vec3(0.f)
                                 : Vec3{rng.uniform(-0.45f, 0.45f), rng.uniform(-0.35f, 0.35f),
                                        rng.uniform(-0.45f, 0.45f)};
        Vec3 axis = normalize(Vec3{rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()});
        prim.world_to_local = Mat3::rotation(axis, rng.uniform(0.f, kTwoPi)).transposed();
        switch (prim.shape) {
            case PrimShape::Sphere:
                prim.size = {rng.uniform(0.3f, 0.6f), 0.f, 0.f};
                break;
            case PrimShape::Box:
                prim.size = {rng.uniform(0.2f, 0.45f), rng.uniform(0.2f, 0.45f),
                             rng.uniform(0.2f, 0.45f)};
                break;
            case PrimShape::Torus:
                prim.size = {rng.uniform(0.3f, 0.5f), rng.uniform(0.08f, 0.2f), 0.f};
                break;
            case PrimShape::Capsule:
                prim.size = {rng.uniform(0.15f, 0.4f), rng.uniform(0.12f, 0.3f), 0.f};
                break;
        }
        prim.material = i;
        scene.primitives.push_back(prim);

        SurfaceMaterial mat;
        bool patterned = (i == 0 && force_pattern) || rng.next_float() < 0.45f;
        Vec3 base{rng.uniform(0.05f, 0.95f), rng.uniform(0.05f, 0.95f), rng.uniform(0.05f, 0.95f)};
        if (patterned) {
            mat.albedo.kind = static_cast<FieldKind>(1 + rng.next_below(4));
            mat.albedo.color_a = base;
            mat.albedo.color_b = {rng.uniform(0.05f, 0.95f), rng.uniform(0.05f, 0.95f),
                                  rng.uniform(0.05f, 0.95f)};
            mat.albedo.scale = rng.uniform(2.f, 7.f);
            mat.albedo.axis = normalize(
                Vec3{rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()});
            mat.albedo.cell_seed = mix64(seed ^ (0xA1B0u + i));
        } else {
            mat.albedo.kind = FieldKind::Constant;
            mat.albedo.color_a = mat.albedo.color_b = base;
        }

        if (rng.next_float() < 0.5f) {
            float r = rng.uniform(0.1f, 0.9f);
            mat.roughness = {FieldKind::Constant, r, r};
        } else {
            mat.roughness.kind = rng.next_float() < 0.5f ? FieldKind::Stripes : FieldKind::HashNoise;
            mat.roughness.lo = rng.uniform(0.08f, 0.4f);
            mat.roughness.hi = rng.uniform(0.5f, 0.95f);
            mat.roughness.scale = rng.uniform(2.f, 6.f);
            mat.roughness.axis = normalize(
                Vec3{rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()});
            mat.roughness.cell_seed = mix64(seed ^ (0x5C00u + i));
        }

        if (rng.next_float() < 0.75f) {  // constant-per-primitive metallic
            float u = rng.next_float();
            float m = u < 0.55f ? 0.f : (u < 0.85f ? 1.f : rng.next_float());
            mat.metallic = {FieldKind::Constant, m, m};
        } else {
            mat.metallic.kind = rng.next_float() < 0.5f ? FieldKind::Checker : FieldKind::Polka;
            mat.metallic.lo = 0.f;
            mat.metallic.hi = 1.f;
            mat.metallic.scale = rng.uniform(2.f, 5.f);
            mat.metallic.cell_seed = mix64(seed ^ (0xEE00u + i));
        }
        scene.materials.push_back(mat);
    }
    return scene;
}

} // namespace irid
