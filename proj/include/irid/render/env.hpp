#pragma once

#include <string>
#include <vector>

#include "irid/core/image.hpp"
#include "irid/math/vec3.hpp"

namespace irid {

// Cube-face addressing. Faces follow the usual +x,-x,+y,-y,+z,-z order;
// (u,v) are in [0,1] with texel centers at (i+0.5)/res.
int dir_to_face(const Vec3& d, float& u, float& v);
Vec3 face_uv_to_dir(int face, float u, float v);  // unnormalized direction
float texel_solid_angle(int i, int j, int res);

// HDR environment with the precomputed halves of the split sum: a
// roughness-indexed prefiltered mip chain, a cosine-convolved irradiance map
// (stored divided by pi, so diffuse = albedo * irradiance), and the
// (scale, bias) specular integral table over (n.v, roughness).
struct EnvironmentMap {
    static constexpr int kMipCount = 5;
    static constexpr int kIrradianceRes = 16;
    static constexpr int kLutRes = 64;

    int resolution = 0;
    std::vector<Image> faces;                        // 6 x res x res x 3
    std::vector<std::vector<Image>> prefiltered;     // [mip][face], level 0 == faces
    std::vector<Image> irradiance;                   // 6 x kIrradianceRes^2 x 3
    Image lut_scale;                                 // kLutRes x kLutRes x 1, x = n.v, y = roughness
    Image lut_bias;

    bool prefiltered_ready() const { return !prefiltered.empty(); }

    // Bilinear lookup in the unfiltered faces.
    Vec3 eval(const Vec3& dir) const;
    // Trilinear lookup in the roughness-indexed chain (requires prefilter_env).
    Vec3 sample_prefiltered(const Vec3& dir, float roughness) const;
    Vec3 irradiance_at(const Vec3& n) const;
    void lut(float nov, float roughness, float& scale, float& bias) const;
};

EnvironmentMap make_constant_env(const Vec3& radiance, int resolution = 16);

// Builds the prefiltered chain, irradiance map, and BRDF table in place.
void prefilter_env(EnvironmentMap& env);

// Specular directional albedo (scale, bias) integrated by quasi-random GGX
// sampling; shared table, computed once per (resolution, sample count).
void build_brdf_lut(Image& scale, Image& bias, int res, int samples = 1024);

// Horizontal-cross PFM layout (4 faces wide, 3 tall).
void save_env_cross(const std::string& path, const EnvironmentMap& env);
EnvironmentMap load_env_cross(const std::string& path);

} // namespace irid
