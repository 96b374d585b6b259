#pragma once

#include <optional>

#include "irid/invopt/diff_render.hpp"

namespace irid {

// One captured view to fit: a tonemapped rgb image plus its lighting
// condition. Observations with equal light ids share one environment.
// Per-pixel mode leaves `camera` empty: every observation sees the parameter
// maps head-on (same pixels, possibly different lighting). Sphere-texture
// mode gives each observation its own camera looking at the unit sphere.
struct InvObservation {
    Image rgb;  // H x W x 3, tonemapped [0,1]
    int light_id = 0;
    std::optional<Camera> camera;
};

// L2 pull of the decoded maps toward diffusion-predicted pseudo-labels, one
// weight per channel group. Normals are fixed inputs here, so lambda_normal
// is accepted for interface completeness but contributes nothing.
struct PriorTerm {
    IntrinsicSet labels;
    double lambda_albedo = 0.1;
    double lambda_normal = 0.1;
    double lambda_mr = 0.5;
};

struct InvOptions {
    int iters = 500;
    double lr = 0.01;
    int env_resolution = 16;  // trainable environment face size
    double env_init = 0.5;    // initial decoded radiance per texel
    // When non-empty, environments are frozen to these prefiltered maps
    // (indexed by light id) instead of being optimized.
    std::vector<EnvironmentMap> known_envs;
    // Per-pixel mode: unit view direction per pixel; empty = head-on (0,0,1).
    Image view_dirs;
    // Sphere-texture mode only: ignored in per-pixel mode.
    int log_every = 0;  // print the loss every n iterations; 0 = silent
};

// Result of an optimization run: unconstrained logits (sigmoid-decoded to
// valid ranges on demand) plus everything needed to rebuild images.
struct OptimState {
    int width = 0, height = 0;       // parameter-map size
    IntrinsicSet base;               // initial maps; normal/mask stay authoritative
    Image opt_mask;                  // 1 where a pixel/texel is actually optimized
    std::vector<int> map_pixels;     // linear indices backing the logit rows
    TensorD albedo_logits;           // (P, 3)
    TensorD rough_logits;            // (P, 1)
    TensorD metal_logits;            // (P, 1)
    std::vector<TensorD> env_logits; // per light id, (6*r², 3); empty when frozen
    std::vector<EnvironmentMap> frozen_envs;
    int env_resolution = 0;
    std::vector<double> loss_trace;  // one entry per forward pass
    bool diverged = false;           // loss went non-finite; params kept at last good step

    // Decoded maps: optimized pixels overwritten, the rest kept from `base`.
    IntrinsicSet decode_maps() const;
    // Decoded (and prefiltered) environment for one lighting condition.
    EnvironmentMap decode_env(int light_id) const;
};

// Fit material maps (and optionally per-light environments) to the
// observations by Adam on sigmoid/softplus logits, minimizing
// mean((tonemap(render) - rgb)^2) plus the optional prior. Deterministic.
OptimState optimize(const std::vector<InvObservation>& observations, const IntrinsicSet& init,
                    const PriorTerm* prior = nullptr, const InvOptions& options = {});

} // namespace irid
