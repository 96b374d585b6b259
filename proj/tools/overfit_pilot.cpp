// Overfit driver: renders a small dataset (if absent), trains the diffusion
// model on it, and periodically reports training-view metrics. Used to pick
// the step budget and learning rate for the desk-scale run.
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "irid/datagen/dataset.hpp"
#include "irid/diffusion/train.hpp"
#include "irid/eval/sweep.hpp"

using namespace irid;

int main(int argc, char** argv) {
    std::string dir = "pilot";
    int steps = 2000, eval_every = 500, infer_steps = 50;
    double lr = 3e-4;
    int batch = 2, objects = 4, views = 4, lights = 2, res = 64;
    uint64_t seed = 1;
    std::string resume;
    for (int i = 1; i < argc; ++i) {
        auto next = [&]() { return std::string(argv[++i]); };
        if (!std::strcmp(argv[i], "--dir")) dir = next();
        else if (!std::strcmp(argv[i], "--steps")) steps = std::atoi(next().c_str());
        else if (!std::strcmp(argv[i], "--eval-every")) eval_every = std::atoi(next().c_str());
        else if (!std::strcmp(argv[i], "--lr")) lr = std::atof(next().c_str());
        else if (!std::strcmp(argv[i], "--batch")) batch = std::atoi(next().c_str());
        else if (!std::strcmp(argv[i], "--res")) res = std::atoi(next().c_str());
        else if (!std::strcmp(argv[i], "--objects")) objects = std::atoi(next().c_str());
        else if (!std::strcmp(argv[i], "--views")) views = std::atoi(next().c_str());
        else if (!std::strcmp(argv[i], "--lights")) lights = std::atoi(next().c_str());
        else if (!std::strcmp(argv[i], "--seed")) seed = std::strtoull(next().c_str(), nullptr, 10);
        else if (!std::strcmp(argv[i], "--resume")) resume = next();
        else if (!std::strcmp(argv[i], "--infer-steps")) infer_steps = std::atoi(next().c_str());
        else {
            std::fprintf(stderr, "unknown flag %s\n", argv[i]);
            return 2;
        }
    }

    const std::string data_dir = dir + "/data";
    DatasetManifest manifest;
    if (std::filesystem::exists(data_dir + "/manifest.json")) {
        manifest = load_manifest(data_dir + "/manifest.json", true);
        std::printf("dataset: reusing %s (%zu objects)\n", data_dir.c_str(),
                    manifest.objects.size());
    } else {
        GenerateParams gp;
        gp.num_objects = objects;
        gp.n_views = views;
        gp.n_lights = lights;
        gp.resolution = res;
        gp.seed = seed;
        gp.threads = 1;
        std::printf("dataset: rendering %d objects x %d views x %d lights at %d...\n", objects,
                    views, lights, res);
        std::fflush(stdout);
        manifest = generate_dataset(gp, data_dir);
    }
    auto ds = load_train_data(manifest);

    TrainState st = [&]() {
        if (!resume.empty()) {
            std::printf("resuming from %s\n", resume.c_str());
            return load_train_state(resume);
        }
        TrainConfig cfg;
        cfg.lr = lr;
        cfg.batch = batch;
        cfg.seed = seed;
        cfg.net.resolution = res;
        return make_train_state(cfg);
    }();
    std::printf("net: %lld params, lr %g, batch %d\n",
                static_cast<long long>(st.ck.net->parameter_count()), st.ck.lr, st.ck.batch);
    std::fflush(stdout);

    while (st.ck.step < steps) {
        const int chunk = std::min<long long>(eval_every, steps - st.ck.step);
        auto losses = train_steps(st, ds, chunk, 50);
        double avg = 0.0;
        for (float l : losses) avg += l;
        avg /= losses.size();
        std::printf("[%6lld] window loss %.4f\n", static_cast<long long>(st.ck.step), avg);

        auto cell = eval_cell(*st.ck.net, st.sched, manifest, views, lights, infer_steps, 9);
        std::printf("[%6lld] albedo si-psnr %.2f dB  ssim %.3f  normal cos %.4f  mr mse %.5f\n",
                    static_cast<long long>(st.ck.step), cell.albedo_si_psnr, cell.albedo_ssim,
                    cell.normal_cos, cell.mr_mse);
        std::fflush(stdout);
        save_checkpoint(st.ck, dir + "/ck.bin");
    }

    auto table = sweep_views_lights(*st.ck.net, st.sched, manifest, {1, views}, {1, lights},
                                    infer_steps, 9);
    std::printf("%s", sweep_csv(table).c_str());
    return 0;
}
