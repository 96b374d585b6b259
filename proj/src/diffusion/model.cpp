#include "irid/diffusion/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "irid/core/io.hpp"

namespace irid {

std::vector<float> encode_chw(const Image& img) {
    require(img.channels == 3, "encode: expected 3 channels");
    std::vector<float> out(static_cast<size_t>(3) * img.width * img.height);
    const int hw = img.width * img.height;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                out[c * hw + y * img.width + x] = 2.f * img.at(x, y, c) - 1.f;
    return out;
}

Image decode_chw(const std::vector<float>& buf, int w, int h) {
    require(buf.size() == static_cast<size_t>(3) * w * h, "decode: size mismatch");
    Image img(w, h, 3);
    const int hw = w * h;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) =
                    std::clamp(0.5f * (buf[c * hw + y * w + x] + 1.f), 0.f, 1.f);
    return img;
}

DenoiseOut denoise_step(const UNet& net, const std::vector<float>& xt,
                        const std::vector<float>& cond, int t,
                        const std::vector<int>& component_ids, int batch, int views,
                        const NoiseSchedule& sched) {
    const int res = net.config().resolution;
    const int bnd = batch * views * net.config().component_count;
    const int64_t plane = static_cast<int64_t>(3) * res * res;
    require(static_cast<int64_t>(xt.size()) == bnd * plane &&
                cond.size() == xt.size(),
            "denoise_step: buffer sizes do not match batch*views*components images");
    sched.check_t(t);

    NoGradGuard ng;
    Tape<float> tape;
    auto in = make_tensor<float>({bnd, 6, res, res});
    const int64_t hw = static_cast<int64_t>(res) * res;
    for (int i = 0; i < bnd; ++i) {
        std::copy_n(cond.data() + i * plane, plane, in->value.data() + i * 6 * hw);
        std::copy_n(xt.data() + i * plane, plane, in->value.data() + i * 6 * hw + plane);
    }
    std::vector<int> ts(bnd, t);
    auto vhat = net.forward(tape, in, ts, component_ids, batch, views);

    DenoiseOut out;
    out.vhat = vhat->value;
    out.x0hat.resize(xt.size());
    const float a = static_cast<float>(sched.sqrt_ab(t));
    const float b = static_cast<float>(sched.sqrt_1mab(t));
    for (size_t i = 0; i < xt.size(); ++i) {
        // clamp so the decoded triplet (x+1)/2 stays inside [0,1]
        out.x0hat[i] = std::clamp(a * xt[i] - b * out.vhat[i], -1.f, 1.f);
    }
    return out;
}

std::vector<IntrinsicSet> infer_with_noise(
    const UNet& net, const NoiseSchedule& sched, const std::vector<Image>& images,
    const std::vector<std::array<std::vector<float>, 3>>& noise, int steps) {
    const int n = static_cast<int>(images.size());
    const int res = net.config().resolution;
    const int comps = net.config().component_count;
    require(n >= 1, "infer: need at least one view");
    require(steps >= 1 && steps <= sched.T, "infer: steps outside [1, T]");
    require(static_cast<int>(noise.size()) == n, "infer: one noise triple per view");
    for (const Image& img : images)
        require(img.width == res && img.height == res,
                "infer: image resolution " + std::to_string(img.width) + "x" +
                    std::to_string(img.height) + " does not match the trained resolution " +
                    std::to_string(res));

    const int bnd = n * comps;
    const int64_t plane = static_cast<int64_t>(3) * res * res;
    std::vector<float> cond(bnd * plane), x(bnd * plane);
    std::vector<int> component_ids(bnd);
    for (int v = 0; v < n; ++v) {
        auto enc = encode_chw(images[v]);
        for (int d = 0; d < comps; ++d) {
            const int slot = v * comps + d;
            component_ids[slot] = d;
            std::copy_n(enc.data(), plane, cond.data() + slot * plane);
            require(static_cast<int64_t>(noise[v][d].size()) == plane,
                    "infer: noise buffer size mismatch");
            std::copy_n(noise[v][d].data(), plane, x.data() + slot * plane);
        }
    }

    // uniformly strided timestep ladder T = t_steps > ... > t_1, then to 0
    std::vector<int> ts(steps);
    for (int k = 0; k < steps; ++k)
        ts[k] = static_cast<int>(std::lround(double(k + 1) * sched.T / steps));
    ts.back() = sched.T;

    std::vector<float> x0hat(x.size());
    for (int k = steps - 1; k >= 0; --k) {
        const int t = ts[k];
        auto out = denoise_step(net, x, cond, t, component_ids, 1, n, sched);
        x0hat = std::move(out.x0hat);
        const int t_prev = (k > 0) ? ts[k - 1] : 0;
        const double a = sched.sqrt_ab(t), b = sched.sqrt_1mab(t);
        const double ap = t_prev == 0 ? 1.0 : sched.sqrt_ab(t_prev);
        const double bp = t_prev == 0 ? 0.0 : sched.sqrt_1mab(t_prev);
        for (size_t i = 0; i < x.size(); ++i) {
            // eta = 0: re-derive the noise direction from the clamped x0
            float eps_hat = static_cast<float>((x[i] - a * x0hat[i]) / b);
            x[i] = static_cast<float>(ap * x0hat[i] + bp * eps_hat);
        }
    }

    std::vector<IntrinsicSet> sets;
    sets.reserve(n);
    for (int v = 0; v < n; ++v) {
        std::array<Triplet, 3> tr;
        for (int d = 0; d < comps; ++d) {
            const int slot = v * comps + d;
            std::vector<float> buf(x0hat.begin() + slot * plane,
                                   x0hat.begin() + (slot + 1) * plane);
            tr[d].kind = static_cast<TripletKind>(d);
            tr[d].data = decode_chw(buf, res, res);
        }
        sets.push_back(from_triplets(tr));
    }
    return sets;
}

std::vector<IntrinsicSet> infer(const UNet& net, const NoiseSchedule& sched,
                                const std::vector<Image>& images, int steps, uint64_t seed) {
    const int res = net.config().resolution;
    const int comps = net.config().component_count;
    const int64_t plane = static_cast<int64_t>(3) * res * res;
    std::vector<std::array<std::vector<float>, 3>> noise(images.size());
    Pcg32 rng(seed, 0x1F);
    for (size_t v = 0; v < images.size(); ++v)
        for (int d = 0; d < comps; ++d) {
            noise[v][d].resize(plane);
            for (float& e : noise[v][d]) e = rng.next_gaussian();
        }
    return infer_with_noise(net, sched, images, noise, steps);
}

// ------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'I', 'R', 'I', 'D', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

struct Writer {
    FILE* f;
    void bytes(const void* p, size_t n) {
        require(std::fwrite(p, 1, n, f) == n, "checkpoint: write failed");
    }
    template <typename T>
    void pod(const T& v) {
        bytes(&v, sizeof(T));
    }
    void str(const std::string& s) {
        pod(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void floats(const std::vector<float>& v) {
        pod(static_cast<uint64_t>(v.size()));
        bytes(v.data(), v.size() * sizeof(float));
    }
};

struct Reader {
    FILE* f;
    void bytes(void* p, size_t n) {
        require(std::fread(p, 1, n, f) == n, "checkpoint: truncated file");
    }
    template <typename T>
    T pod() {
        T v;
        bytes(&v, sizeof(T));
        return v;
    }
    std::string str() {
        uint32_t n = pod<uint32_t>();
        require(n < (1u << 20), "checkpoint: implausible string length");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::vector<float> floats() {
        uint64_t n = pod<uint64_t>();
        require(n < (1ull << 31), "checkpoint: implausible tensor size");
        std::vector<float> v(n);
        bytes(v.data(), n * sizeof(float));
        return v;
    }
};

} // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    require(ck.net != nullptr, "checkpoint: no network");
    FILE* f = std::fopen(path.c_str(), "wb");
    require(f != nullptr, "checkpoint: cannot open " + path + " for writing");
    Writer w{f};
    w.bytes(kMagic, sizeof(kMagic));
    w.pod(kVersion);
    const UNetConfig& c = ck.config;
    for (int v : {c.in_channels, c.out_channels, c.channels[0], c.channels[1], c.channels[2],
                  c.emb_dim, c.heads, c.norm_groups, c.resolution, c.component_count})
        w.pod(static_cast<int32_t>(v));
    w.pod(static_cast<int32_t>(ck.schedule_T));
    w.pod(ck.schedule_shift);
    w.pod(ck.lr);
    w.pod(static_cast<int32_t>(ck.batch));
    w.pod(ck.p_single);
    w.pod(ck.seed);
    w.pod(ck.step);
    w.pod(ck.rng.state);
    w.pod(ck.rng.inc);

    const auto& named = ck.net->named_parameters();
    w.pod(static_cast<uint32_t>(named.size()));
    for (const auto& [name, t] : named) {
        w.str(name);
        w.pod(static_cast<uint32_t>(t->shape.size()));
        for (int d : t->shape) w.pod(static_cast<int32_t>(d));
        w.floats(t->value);
    }
    const bool has_opt = !ck.opt.m.empty();
    w.pod(static_cast<uint8_t>(has_opt ? 1 : 0));
    if (has_opt) {
        require(ck.opt.m.size() == named.size(), "checkpoint: optimizer/parameter mismatch");
        w.pod(ck.opt.t);
        for (size_t i = 0; i < named.size(); ++i) {
            w.floats(ck.opt.m[i]);
            w.floats(ck.opt.v[i]);
        }
    }
    w.bytes("END1", 4);
    require(std::fclose(f) == 0, "checkpoint: close failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    require(f != nullptr, "checkpoint: cannot open " + path);
    Reader r{f};
    char magic[8];
    r.bytes(magic, 8);
    require(std::memcmp(magic, kMagic, 8) == 0, "checkpoint: bad magic in " + path);
    require(r.pod<uint32_t>() == kVersion, "checkpoint: unsupported version");

    Checkpoint ck;
    UNetConfig& c = ck.config;
    c.in_channels = r.pod<int32_t>();
    c.out_channels = r.pod<int32_t>();
    for (int i = 0; i < 3; ++i) c.channels[i] = r.pod<int32_t>();
    c.emb_dim = r.pod<int32_t>();
    c.heads = r.pod<int32_t>();
    c.norm_groups = r.pod<int32_t>();
    c.resolution = r.pod<int32_t>();
    c.component_count = r.pod<int32_t>();
    ck.schedule_T = r.pod<int32_t>();
    ck.schedule_shift = r.pod<double>();
    ck.lr = r.pod<double>();
    ck.batch = r.pod<int32_t>();
    ck.p_single = r.pod<double>();
    ck.seed = r.pod<uint64_t>();
    ck.step = r.pod<int64_t>();
    ck.rng.state = r.pod<uint64_t>();
    ck.rng.inc = r.pod<uint64_t>();

    ck.net = std::make_unique<UNet>(c, 0);
    const auto& named = ck.net->named_parameters();
    const uint32_t count = r.pod<uint32_t>();
    require(count == named.size(), "checkpoint: parameter count mismatch (file " +
                                       std::to_string(count) + ", net " +
                                       std::to_string(named.size()) + ")");
    for (const auto& [name, t] : named) {
        require(r.str() == name, "checkpoint: parameter order mismatch at " + name);
        const uint32_t nd = r.pod<uint32_t>();
        require(nd == t->shape.size(), "checkpoint: rank mismatch at " + name);
        for (int d : t->shape)
            require(r.pod<int32_t>() == d, "checkpoint: shape mismatch at " + name);
        auto vals = r.floats();
        require(vals.size() == t->value.size(), "checkpoint: size mismatch at " + name);
        t->value = std::move(vals);
    }
    if (r.pod<uint8_t>()) {
        ck.opt.t = r.pod<int64_t>();
        ck.opt.m.resize(named.size());
        ck.opt.v.resize(named.size());
        for (size_t i = 0; i < named.size(); ++i) {
            ck.opt.m[i] = r.floats();
            ck.opt.v[i] = r.floats();
            require(ck.opt.m[i].size() == named[i].second->value.size(),
                    "checkpoint: optimizer state size mismatch");
        }
    }
    char tail[4];
    r.bytes(tail, 4);
    require(std::memcmp(tail, "END1", 4) == 0, "checkpoint: missing trailer");
    std::fclose(f);
    return ck;
}

} // namespace irid
