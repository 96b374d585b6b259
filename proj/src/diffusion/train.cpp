#include "irid/diffusion/train.hpp"

#include <cmath>
#include <cstdio>

namespace irid {

TrainData load_train_data(const DatasetManifest& m) {
    require(!m.partial, "train data: manifest is marked partial");
    TrainData ds;
    ds.resolution = m.resolution;
    ds.objects.reserve(m.objects.size());
    for (int oi = 0; oi < static_cast<int>(m.objects.size()); ++oi) {
        const ManifestObject& obj = m.objects[oi];
        TrainObject to;
        to.view_triplets.resize(obj.views.size());
        for (int v = 0; v < static_cast<int>(obj.views.size()); ++v) {
            auto triplets = to_triplets(load_intrinsics(m, oi, v));
            for (int d = 0; d < 3; ++d)
                to.view_triplets[v][d] = encode_chw(triplets[d].data);
        }
        to.entries.reserve(obj.entries.size());
        for (const ManifestEntry& e : obj.entries) {
            TrainEntry te;
            te.view_id = e.view_id;
            te.light_id = e.light_id;
            te.cond = encode_chw(load_rgb(m, oi, e.view_id, e.light_id));
            to.entries.push_back(std::move(te));
        }
        ds.objects.push_back(std::move(to));
    }
    return ds;
}

TrainingSample sample_batch_n(const TrainData& ds, Pcg32& rng, int n) {
    require(!ds.objects.empty(), "sample: empty dataset");
    bool any = false;
    for (const auto& o : ds.objects) any = any || static_cast<int>(o.entries.size()) >= n;
    require(any, "sample: no object has " + std::to_string(n) + " entries");
    TrainingSample s;
    s.n = n;
    for (;;) {
        s.object = static_cast<int>(rng.next_below(static_cast<uint32_t>(ds.objects.size())));
        const int avail = static_cast<int>(ds.objects[s.object].entries.size());
        if (avail < n) continue; // object too small; redraw
        // partial Fisher-Yates over entry indices
        std::vector<int> idx(avail);
        for (int i = 0; i < avail; ++i) idx[i] = i;
        for (int i = 0; i < n; ++i) {
            int j = i + static_cast<int>(rng.next_below(static_cast<uint32_t>(avail - i)));
            std::swap(idx[i], idx[j]);
        }
        s.entry_idx.assign(idx.begin(), idx.begin() + n);
        return s;
    }
}

TrainingSample sample_batch(const TrainData& ds, Pcg32& rng, double p_single) {
    const int n = (rng.next_double() < p_single) ? 1 : 3;
    return sample_batch_n(ds, rng, n);
}

TrainState make_train_state(const TrainConfig& cfg) {
    TrainState st;
    st.ck.config = cfg.net;
    st.ck.schedule_T = cfg.schedule_T;
    st.ck.schedule_shift = cfg.schedule_shift;
    st.ck.lr = cfg.lr;
    st.ck.batch = cfg.batch;
    st.ck.p_single = cfg.p_single;
    st.ck.seed = cfg.seed;
    st.ck.step = 0;
    st.ck.rng = Pcg32(cfg.seed, 0x7124);
    st.ck.net = std::make_unique<UNet>(cfg.net, mix64(cfg.seed ^ 0x11e7));
    st.sched = make_model_schedule(cfg.schedule_T, cfg.schedule_shift);
    return st;
}

TrainState load_train_state(const std::string& checkpoint_path) {
    TrainState st;
    st.ck = load_checkpoint(checkpoint_path);
    st.sched = st.ck.schedule();
    return st;
}

std::vector<float> train_steps(TrainState& st, const TrainData& ds, int steps, int log_every) {
    Checkpoint& ck = st.ck;
    const UNetConfig& nc = ck.config;
    require(ds.resolution == nc.resolution,
            "train: dataset resolution " + std::to_string(ds.resolution) +
                " != network resolution " + std::to_string(nc.resolution));
    require(nc.component_count == kTripletCount, "train: component count must be 3");
    const int res = nc.resolution;
    const int comps = nc.component_count;
    const int64_t hw = static_cast<int64_t>(res) * res;
    const int64_t plane = 3 * hw;
    auto params = ck.net->parameters();
    AdamConfig adam;
    adam.lr = ck.lr;

    std::vector<float> losses;
    losses.reserve(steps);
    std::vector<float> eps(plane);
    for (int s = 0; s < steps; ++s) {
        Pcg32& rng = ck.rng;
        // one multi/single decision per step keeps the view axis rectangular
        const int n = (rng.next_double() < ck.p_single) ? 1 : 3;
        const int bnd = ck.batch * n * comps;

        std::vector<TrainingSample> samples;
        std::vector<int> t_img(bnd), comp_ids(bnd);
        auto in = make_tensor<float>({bnd, 6, res, res});
        auto v_tgt = make_tensor<float>({bnd, 3, res, res});
        for (int b = 0; b < ck.batch; ++b) {
            TrainingSample smp = sample_batch_n(ds, rng, n);
            const int t = 1 + static_cast<int>(rng.next_below(static_cast<uint32_t>(st.sched.T)));
            const TrainObject& obj = ds.objects[smp.object];
            for (int vi = 0; vi < n; ++vi) {
                const TrainEntry& entry = obj.entries[smp.entry_idx[vi]];
                const auto& triplets = obj.view_triplets[entry.view_id];
                for (int d = 0; d < comps; ++d) {
                    const int slot = (b * n + vi) * comps + d;
                    t_img[slot] = t;
                    comp_ids[slot] = d;
                    for (float& e : eps) e = rng.next_gaussian();
                    auto xt = q_sample(triplets[d], eps, t, st.sched);
                    auto v = v_target(triplets[d], eps, t, st.sched);
                    float* dst = in->value.data() + slot * 6 * hw;
                    std::copy_n(entry.cond.data(), plane, dst);
                    std::copy_n(xt.data(), plane, dst + plane);
                    std::copy_n(v.data(), plane, v_tgt->value.data() + slot * plane);
                }
            }
            samples.push_back(std::move(smp));
        }

        Tape<float> tape;
        auto vhat = ck.net->forward(tape, in, t_img, comp_ids, ck.batch, n);
        auto diff = sub(tape, vhat, v_tgt);
        auto loss = mean(tape, mul(tape, diff, diff));
        const float loss_val = loss->value[0];
        if (!std::isfinite(loss_val)) {
            std::string dump = "train: non-finite loss at step " + std::to_string(ck.step) +
                               " (n=" + std::to_string(n) + "; objects/t:";
            for (const auto& smp : samples) dump += " " + std::to_string(smp.object);
            dump += "; t=" + std::to_string(t_img[0]) + ")";
            throw Error(dump);
        }
        zero_grad(params);
        tape.backward(loss);
        if (!adam_step(params, ck.opt, adam) && log_every > 0)
            std::printf("step %lld: non-finite gradient, step skipped\n",
                        static_cast<long long>(ck.step));
        losses.push_back(loss_val);
        ck.step += 1;
        if (log_every > 0 && (ck.step % log_every == 0 || s == 0))
            std::printf("step %lld  loss %.6f\n", static_cast<long long>(ck.step),
                        static_cast<double>(loss_val));
    }
    return losses;
}

} // namespace irid
