#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irid/core/manifest.hpp"
#include "irid/diffusion/model.hpp"
#include "irid/eval/metrics.hpp"

namespace irid {

// One (viewpoints, lightings) configuration: each object is decomposed from
// its first V views under the first L lighting slots, all V*L conditioning
// images denoised jointly.
struct SweepCell {
    int views = 0;
    int lights = 0;
    MetricReport report;
};

// Scores one configuration against the view-matched ground-truth intrinsics,
// averaged per object and then across objects. Deterministic in seed.
MetricReport eval_cell(const UNet& net, const NoiseSchedule& sched, const DatasetManifest& m,
                       int views, int lights, int steps, uint64_t seed);

// Full table over the cross product of the two lists.
std::vector<SweepCell> sweep_views_lights(const UNet& net, const NoiseSchedule& sched,
                                          const DatasetManifest& m,
                                          const std::vector<int>& views_list,
                                          const std::vector<int>& lights_list, int steps,
                                          uint64_t seed);

std::string sweep_csv(const std::vector<SweepCell>& table);

} // namespace irid
