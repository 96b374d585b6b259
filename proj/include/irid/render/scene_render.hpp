#pragma once

#include "irid/core/types.hpp"
#include "irid/datagen/lighting.hpp"
#include "irid/datagen/scene.hpp"

namespace irid {

struct ViewRender {
    Image hdr;  // linear radiance, H x W x 3
    IntrinsicSet intrinsics;
};

// Sphere-traces the scene once per pixel, shades hits with the Monte Carlo
// integrator (shadow rays for point lights), and returns the HDR image plus
// the ground-truth intrinsic maps at the hits. Deterministic in `seed`
// regardless of thread count: every pixel owns an RNG stream derived from
// (seed, pixel index).
ViewRender render_view(const SdfScene& scene, const Camera& camera,
                       const LightingCondition& lighting, int spp, uint64_t seed,
                       int threads = 0);

} // namespace irid
