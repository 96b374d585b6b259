#pragma once

#include <cstdint>
#include <string>

#include "irid/core/manifest.hpp"

namespace irid {

struct GenerateParams {
    int num_objects = 1;
    int n_views = 12;
    int n_lights = 7;
    int resolution = 64;
    int spp = 64;
    uint64_t seed = 0;
    int threads = 0;  // 0 = all cores
};

// Renders num_objects procedural scenes under n_views cameras x n_lights
// illumination slots into out_dir and writes manifest.json.  Intrinsic maps
// are stored once per view and shared by every lighting entry of that view.
// Fully deterministic in (params, seed).  A write failure leaves a manifest
// flagged partial before the error propagates.
DatasetManifest generate_dataset(const GenerateParams& params, const std::string& out_dir);

// Camera ring used by the generator: evenly spaced azimuth with a
// seed-dependent phase, elevation drawn from [-10, 45] degrees, distance
// 3.8 bounding radii looking at the origin.
std::vector<Camera> sample_views(uint64_t seed, int n_views, int resolution, float scene_radius);

} // namespace irid
