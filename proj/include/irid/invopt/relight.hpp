#pragma once

#include "irid/core/types.hpp"
#include "irid/render/env.hpp"

namespace irid {

// Shade an intrinsic set under an environment with the split-sum renderer.
// Normals are taken as stored camera-space maps facing a head-on viewer
// (v = (0,0,1)); a per-pixel `view_dirs` image overrides that. Background
// pixels (mask <= 0.5 or zero normal) come out black, as do grazing pixels
// with n·v <= 0. relight_hdr returns linear radiance; relight tonemaps it.
Image relight_hdr(const IntrinsicSet& s, const EnvironmentMap& env,
                  const Image& view_dirs = {});
Image relight(const IntrinsicSet& s, const EnvironmentMap& env, const Image& view_dirs = {});

// One material change: assign a value or scale the existing one over a
// region. `region` is a 1-channel mask (empty = whole foreground); only
// foreground pixels inside it change, everything else stays bit-identical.
struct MaterialEdit {
    enum class Channel { Albedo, Roughness, Metallic };
    Channel channel = Channel::Albedo;
    Image region;
    bool use_scale = false;
    Vec3 value{0.f, 0.f, 0.f};  // assigned value; .x alone for scalar channels
    float scale = 1.f;
};

// Returns the modified copy. Edits that would leave any touched value outside
// [0, 1] are rejected.
IntrinsicSet edit_material(const IntrinsicSet& s, const MaterialEdit& edit);

} // namespace irid
