#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "irid/core/types.hpp"
#include "irid/diffusion/schedule.hpp"
#include "irid/diffusion/unet.hpp"
#include "irid/tensor/optim.hpp"

namespace irid {

// Model buffers are CHW float planes in [-1,1]; images live in [0,1].
std::vector<float> encode_chw(const Image& img);            // [0,1] HWC -> [-1,1] CHW
Image decode_chw(const std::vector<float>& buf, int w, int h); // clamp to [0,1]

// One network evaluation at timestep t plus exact x0 recovery; x0hat is
// clamped so the decoded triplet stays in [0,1].
struct DenoiseOut {
    std::vector<float> vhat;  // (B*N*D, 3, H, W) flattened
    std::vector<float> x0hat; // same layout, clamped
};
DenoiseOut denoise_step(const UNet& net, const std::vector<float>& xt,
                        const std::vector<float>& cond, int t,
                        const std::vector<int>& component_ids, int batch, int views,
                        const NoiseSchedule& sched);

// Deterministic DDIM sampling (eta = 0) over `steps` uniformly-strided
// timesteps; one IntrinsicSet per input view. Noise supplies the t=T start,
// one 3xHxW buffer per (view, component).
std::vector<IntrinsicSet> infer_with_noise(
    const UNet& net, const NoiseSchedule& sched, const std::vector<Image>& images,
    const std::vector<std::array<std::vector<float>, 3>>& noise, int steps);

// Convenience wrapper drawing the per-slot noise from `seed`.
std::vector<IntrinsicSet> infer(const UNet& net, const NoiseSchedule& sched,
                                const std::vector<Image>& images, int steps, uint64_t seed);

// Versioned binary checkpoint: config, schedule, named tensors, optimizer
// moments, RNG position, step counter.
struct Checkpoint {
    UNetConfig config;
    int schedule_T = 1000;
    double schedule_shift = 2.0;
    double lr = 1e-4;
    int batch = 2;
    double p_single = 0.5;
    uint64_t seed = 0;
    int64_t step = 0;
    Pcg32 rng;
    std::unique_ptr<UNet> net;
    AdamState<float> opt;

    NoiseSchedule schedule() const { return make_model_schedule(schedule_T, schedule_shift); }
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace irid
