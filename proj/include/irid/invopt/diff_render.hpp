#pragma once

#include <array>

#include "irid/core/types.hpp"
#include "irid/render/env.hpp"
#include "irid/tensor/ops.hpp"

namespace irid {

using TapeD = Tape<double>;
using TensorD = TensorRef<double>;

// Fixed bilinear tap pattern: row p of (idx, w) holds k texel indices and
// weights into a flattened face set (face * res^2 + y * res + x).
struct PixelTaps {
    std::vector<int> idx;
    std::vector<double> w;
    int k = 4;
};

// Everything the split-sum shader needs that depends only on geometry. With
// normals and view directions frozen, the reflection/irradiance lookups and
// the BRDF-table row per pixel are constants; the remaining render is smooth
// in the material maps and linear in the environment radiance.
struct DiffRenderGeom {
    int count = 0;              // shaded pixels
    std::vector<int> pixels;    // linear y*W+x source index of each shaded pixel
    std::vector<double> nov;    // n·v clamped to (0,1]
    std::array<PixelTaps, EnvironmentMap::kMipCount> mip_taps;  // reflect dir per mip
    PixelTaps irr_taps;         // normal dir in the irradiance map
    std::array<int, EnvironmentMap::kMipCount> mip_res{};
    int irr_res = 0;
    // BRDF integration table sliced at each pixel's n·v: count x kLutRes rows
    // along the roughness axis.
    std::vector<double> lut_scale_rows;
    std::vector<double> lut_bias_rows;
};

// Face resolutions the prefiltered chain uses for a given environment size.
std::array<int, EnvironmentMap::kMipCount> prefiltered_mip_res(int env_res);

// Bilinear footprint of a direction on a face set of the given resolution
// (edge-clamped, no cross-face filtering). Appends 4 taps to `out`.
void append_face_taps(const Vec3& dir, int res, PixelTaps& out);

// Build the frozen structure from explicit per-pixel maps. A pixel is shaded
// only when mask > 0.5, its normal is nonzero, and n·v > 0; everything else
// renders black and carries no gradient. An empty `view` means the head-on
// viewer (0,0,1) used for stored camera-space normal maps.
DiffRenderGeom build_pixel_geom(const Image& normal, const Image& view, const Image& mask,
                                int env_res);

// Same structure built from explicit direction lists (one entry per pixel).
DiffRenderGeom build_geom_from_dirs(const std::vector<Vec3>& normals,
                                    const std::vector<Vec3>& views,
                                    const std::vector<int>& pixels, int env_res);

// Fixed linear maps reproducing the prefiltered-chain convolutions for face
// resolutions <= 16 (where the chain never downsamples first): one
// row-normalized GGX filter per mip plus the cosine filter for irradiance.
// Stored as constant graph nodes so they can be reused across iterations.
struct EnvOperators {
    int res = 0;
    std::array<int, EnvironmentMap::kMipCount> mip_res{};
    int irr_res = 0;
    std::array<TensorD, EnvironmentMap::kMipCount> filter;  // [m]: (6*mip_res², 6*res²); [0] empty
    TensorD cosine;                                         // (6*irr_res², 6*res²)
};

// Built once per resolution and cached (the weights depend only on geometry).
const EnvOperators& env_operators(int res);

// Per-texel environment values feeding the shader, as graph nodes.
struct EnvFeatures {
    std::array<TensorD, EnvironmentMap::kMipCount> mips;  // (6*mip_res², 3) each
    TensorD irr;                                          // (6*irr_res², 3)
};

// Trainable environment: radiance = softplus(logits), filtered by the fixed
// operators. logits: (6*res², 3).
EnvFeatures env_features(TapeD& tape, const EnvOperators& ops, const TensorD& env_logits);

// Frozen environment: texel values copied from an already prefiltered map.
EnvFeatures env_features(const EnvironmentMap& env);

// Differentiable split-sum over the frozen geometry; returns linear-radiance
// rgb (count, 3). albedo: (count, 3); roughness, metallic: (count, 1), all
// already decoded to valid range.
TensorD render_pixels(TapeD& tape, const DiffRenderGeom& geom, const EnvFeatures& env,
                      const TensorD& albedo, const TensorD& roughness, const TensorD& metallic);

// clamp to [0,1] + sRGB transfer with the almost-everywhere derivative.
// NaN inputs propagate (the optimizer halts on a non-finite loss).
TensorD tonemap_t(TapeD& tape, const TensorD& x);

} // namespace irid
