#pragma once

#include <array>
#include <string>
#include <vector>

#include "irid/core/manifest.hpp"
#include "irid/diffusion/model.hpp"

namespace irid {

// Dataset pulled into RAM as encoded CHW planes.
struct TrainEntry {
    int view_id = 0, light_id = 0;
    std::vector<float> cond; // 3*H*W in [-1,1]
};
struct TrainObject {
    std::vector<std::array<std::vector<float>, 3>> view_triplets; // [view][component]
    std::vector<TrainEntry> entries;
};
struct TrainData {
    int resolution = 0;
    std::vector<TrainObject> objects;
};

TrainData load_train_data(const DatasetManifest& m);

// One training sample: an object plus N (view, light) slots drawn without
// replacement from its grid, mixing same/different view and illumination.
struct TrainingSample {
    int object = 0;
    int n = 0;
    std::vector<int> entry_idx; // indices into objects[object].entries
};

// N fixed by the caller; objects with fewer than N entries are redrawn.
TrainingSample sample_batch_n(const TrainData& ds, Pcg32& rng, int n);
// N = 1 with probability p_single, else 3.
TrainingSample sample_batch(const TrainData& ds, Pcg32& rng, double p_single);

struct TrainConfig {
    int steps = 2000;
    double lr = 1e-4;
    int batch = 2; // instances per step; images per step = batch*N*D
    double p_single = 0.5;
    uint64_t seed = 0;
    int schedule_T = 1000;
    double schedule_shift = 2.0;
    UNetConfig net;
};

struct TrainState {
    Checkpoint ck; // owns the net, optimizer state, RNG, step counter
    NoiseSchedule sched;
};

TrainState make_train_state(const TrainConfig& cfg);
TrainState load_train_state(const std::string& checkpoint_path);

// Runs `steps` further optimization steps; returns the per-step losses.
// Prints progress every `log_every` steps (0 = silent). Raises on a
// non-finite loss with a diagnostic of the offending batch.
std::vector<float> train_steps(TrainState& st, const TrainData& ds, int steps,
                               int log_every = 100);

} // namespace irid
