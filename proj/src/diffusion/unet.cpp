#include "irid/diffusion/unet.hpp"

#include <cmath>

namespace irid {

namespace {

TensorRef<float> add_bias_2d(Tape<float>& tape, const TensorRef<float>& x,
                             const TensorRef<float>& b) {
    return add(tape, x, broadcast_to(tape, b, x->shape));
}

TensorRef<float> add_bias_chw(Tape<float>& tape, const TensorRef<float>& x,
                              const TensorRef<float>& b) {
    auto b4 = reshape(tape, b, {1, b->shape[0], 1, 1});
    return add(tape, x, broadcast_to(tape, b4, x->shape));
}

// one multi-head self-attention over tokens (G, T, C)
TensorRef<float> mha_tokens(Tape<float>& tape, const TensorRef<float>& tokens,
                            const MhaWeights& w, int heads) {
    const int g = tokens->shape[0], tk = tokens->shape[1], c = tokens->shape[2];
    const int hd = c / heads;
    auto flat = reshape(tape, tokens, {g * tk, c});
    auto split = [&](const TensorRef<float>& wm, const TensorRef<float>& bm) {
        auto p = add_bias_2d(tape, matmul(tape, flat, wm), bm);
        // (G*T, C) -> (G, T, H, hd) -> (G, H, T, hd) -> (G*H, T, hd)
        auto r = reshape(tape, p, {g, tk, heads, hd});
        return reshape(tape, permute(tape, r, {0, 2, 1, 3}), {g * heads, tk, hd});
    };
    auto q = split(w.wq, w.bq);
    auto k = split(w.wk, w.bk);
    auto v = split(w.wv, w.bv);
    auto scores = affine(tape, bmm(tape, q, k, false, true),
                         1.f / std::sqrt(static_cast<float>(hd)), 0.f);
    auto att = softmax(tape, scores, 2);
    auto ctx = bmm(tape, att, v);
    auto merged = reshape(
        tape, permute(tape, reshape(tape, ctx, {g, heads, tk, hd}), {0, 2, 1, 3}), {g * tk, c});
    auto out = add_bias_2d(tape, matmul(tape, merged, w.wo), w.bo);
    return reshape(tape, out, {g, tk, c});
}

TensorRef<float> group_norm_w(Tape<float>& tape, const TensorRef<float>& x,
                              const TensorRef<float>& g, const TensorRef<float>& b, int groups) {
    return group_norm(tape, x, g, b, groups);
}

} // namespace

TensorRef<float> AttentionBlock::apply(Tape<float>& tape, const TensorRef<float>& x, int batch,
                                       int views, int components) const {
    const int bnd = x->shape[0], c = x->shape[1], h = x->shape[2], w = x->shape[3];
    require(bnd == batch * views * components,
            "attention: leading dim " + std::to_string(bnd) + " != B*N*D");
    require(c == channels, "attention: channel mismatch");
    const int hw = h * w;

    // across components: tokens D*h*w within one (batch, view)
    auto n1 = group_norm_w(tape, x, comp.norm_g, comp.norm_b, norm_groups);
    auto t1 = reshape(tape,
                      permute(tape, reshape(tape, n1, {batch * views, components, c, hw}),
                              {0, 1, 3, 2}),
                      {batch * views, components * hw, c});
    auto a1 = mha_tokens(tape, t1, comp, heads);
    auto r1 = reshape(tape,
                      permute(tape, reshape(tape, a1, {batch * views, components, hw, c}),
                              {0, 1, 3, 2}),
                      {bnd, c, h, w});
    auto x1 = add(tape, x, r1);

    // across views: tokens N*h*w within one (batch, component)
    auto n2 = group_norm_w(tape, x1, view.norm_g, view.norm_b, norm_groups);
    auto t2 = reshape(tape,
                      permute(tape, reshape(tape, n2, {batch, views, components, c, hw}),
                              {0, 2, 1, 4, 3}),
                      {batch * components, views * hw, c});
    auto a2 = mha_tokens(tape, t2, view, heads);
    auto r2 = reshape(tape,
                      permute(tape, reshape(tape, a2, {batch, components, views, hw, c}),
                              {0, 2, 1, 4, 3}),
                      {bnd, c, h, w});
    return add(tape, x1, r2);
}

AttentionBlock make_attention_block(int channels, int heads, int norm_groups, Pcg32& rng,
                                    ParamRegistry* reg, const std::string& prefix) {
    require(heads >= 1 && channels % heads == 0,
            "attention: channels " + std::to_string(channels) + " not divisible by heads " +
                std::to_string(heads));
    require(channels % norm_groups == 0, "attention: channels not divisible by norm groups");
    AttentionBlock blk;
    blk.channels = channels;
    blk.heads = heads;
    blk.norm_groups = norm_groups;
    const float stdev = 1.f / std::sqrt(static_cast<float>(channels));
    auto make = [&](const std::string& name, Shape shape, float sd) {
        auto t = sd == 0.f ? make_tensor<float>(shape, true)
                           : randn_tensor<float>(shape, rng, sd, true);
        if (reg) reg->emplace_back(prefix + "." + name, t);
        return t;
    };
    auto fill_mode = [&](MhaWeights& m, const std::string& mode) {
        m.norm_g = make(mode + ".norm.g", {channels}, 0.f);
        std::fill(m.norm_g->value.begin(), m.norm_g->value.end(), 1.f);
        m.norm_b = make(mode + ".norm.b", {channels}, 0.f);
        m.wq = make(mode + ".wq", {channels, channels}, stdev);
        m.bq = make(mode + ".bq", {channels}, 0.f);
        m.wk = make(mode + ".wk", {channels, channels}, stdev);
        m.bk = make(mode + ".bk", {channels}, 0.f);
        m.wv = make(mode + ".wv", {channels, channels}, stdev);
        m.bv = make(mode + ".bv", {channels}, 0.f);
        m.wo = make(mode + ".wo", {channels, channels}, 0.f); // residual starts as identity
        m.bo = make(mode + ".bo", {channels}, 0.f);
    };
    fill_mode(blk.comp, "comp");
    fill_mode(blk.view, "view");
    return blk;
}

TensorRef<float> timestep_embedding(const std::vector<int>& t, int dim) {
    require(dim % 2 == 0, "timestep embedding dim must be even");
    const int half = dim / 2;
    auto out = make_tensor<float>({static_cast<int>(t.size()), dim});
    for (size_t i = 0; i < t.size(); ++i)
        for (int j = 0; j < half; ++j) {
            double freq = std::exp(-std::log(10000.0) * j / (half - 1));
            out->value[i * dim + j] = static_cast<float>(std::sin(t[i] * freq));
            out->value[i * dim + half + j] = static_cast<float>(std::cos(t[i] * freq));
        }
    return out;
}

TensorRef<float> UNet::param(const std::string& name, Shape shape, float stdev) {
    auto t = stdev == 0.f ? make_tensor<float>(shape, true)
                          : randn_tensor<float>(shape, init_rng_, stdev, true);
    named_.emplace_back(name, t);
    return t;
}

UNet::Conv UNet::make_conv(const std::string& name, int cin, int cout, int k, int stride,
                           bool zero_init) {
    Conv c;
    c.stride = stride;
    const float stdev =
        zero_init ? 0.f : std::sqrt(2.f / (static_cast<float>(cin) * k * k));
    c.w = param(name + ".w", {cout, cin, k, k}, stdev);
    c.b = param(name + ".b", {cout}, 0.f);
    return c;
}

UNet::Norm UNet::make_norm(const std::string& name, int c) {
    Norm n;
    n.g = param(name + ".g", {c}, 0.f);
    std::fill(n.g->value.begin(), n.g->value.end(), 1.f);
    n.b = param(name + ".b", {c}, 0.f);
    return n;
}

UNet::ResBlock UNet::make_res(const std::string& name, int cin, int cout) {
    ResBlock r;
    r.n1 = make_norm(name + ".n1", cin);
    r.c1 = make_conv(name + ".c1", cin, cout, 3, 1, false);
    r.ew = param(name + ".emb.w", {cfg_.emb_dim, cout},
                 std::sqrt(2.f / static_cast<float>(cfg_.emb_dim)));
    r.eb = param(name + ".emb.b", {cout}, 0.f);
    r.n2 = make_norm(name + ".n2", cout);
    r.c2 = make_conv(name + ".c2", cout, cout, 3, 1, true); // block starts as identity
    if (cin != cout) r.skip = param(name + ".skip.w", {cout, cin, 1, 1},
                                    std::sqrt(1.f / static_cast<float>(cin)));
    return r;
}

UNet::UNet(const UNetConfig& cfg, uint64_t seed) : cfg_(cfg), init_rng_(seed, 0x0E7) {
    const int c0 = cfg.channels[0], c1 = cfg.channels[1], c2 = cfg.channels[2];
    require(cfg.resolution % 8 == 0 && cfg.resolution >= 8,
            "unet: resolution must be a multiple of 8");
    for (int c : cfg.channels)
        require(c % cfg.norm_groups == 0 && c % cfg.heads == 0,
                "unet: channels must divide by norm groups and heads");

    stem_ = make_conv("stem", cfg.in_channels, c0, 3, 2, false);
    rb0a_ = make_res("enc0.rb0", c0, c0);
    rb0b_ = make_res("enc0.rb1", c0, c0);
    down0_ = make_conv("down0", c0, c1, 3, 2, false);
    rb1a_ = make_res("enc1.rb0", c1, c1);
    rb1b_ = make_res("enc1.rb1", c1, c1);
    down1_ = make_conv("down1", c1, c2, 3, 2, false);
    rb2a_ = make_res("enc2.rb0", c2, c2);
    rb2b_ = make_res("enc2.rb1", c2, c2);
    attn_lo_ = make_attention_block(c2, cfg.heads, cfg.norm_groups, init_rng_, &named_,
                                    "attn_lo");
    up1_w_ = param("up1.w", {c2, c1, 4, 4}, std::sqrt(2.f / (c2 * 16.f)));
    up1_b_ = param("up1.b", {c1}, 0.f);
    rb3a_ = make_res("dec1.rb0", c1 * 2, c1);
    rb3b_ = make_res("dec1.rb1", c1, c1);
    attn_mid_ = make_attention_block(c1, cfg.heads, cfg.norm_groups, init_rng_, &named_,
                                     "attn_mid");
    up0_w_ = param("up0.w", {c1, c0, 4, 4}, std::sqrt(2.f / (c1 * 16.f)));
    up0_b_ = param("up0.b", {c0}, 0.f);
    rb4a_ = make_res("dec0.rb0", c0 * 2, c0);
    rb4b_ = make_res("dec0.rb1", c0, c0);
    upf_w_ = param("upf.w", {c0, c0, 4, 4}, std::sqrt(2.f / (c0 * 16.f)));
    upf_b_ = param("upf.b", {c0}, 0.f);
    head_norm_ = make_norm("head.norm", c0);
    head_ = make_conv("head", c0, cfg.out_channels, 3, 1, true);
    emb_w1_ = param("emb.w1", {cfg.emb_dim, cfg.emb_dim},
                    std::sqrt(2.f / static_cast<float>(cfg.emb_dim)));
    emb_b1_ = param("emb.b1", {cfg.emb_dim}, 0.f);
    emb_w2_ = param("emb.w2", {cfg.emb_dim, cfg.emb_dim},
                    std::sqrt(2.f / static_cast<float>(cfg.emb_dim)));
    emb_b2_ = param("emb.b2", {cfg.emb_dim}, 0.f);
    comp_embed_ = param("comp_embed", {cfg.component_count, cfg.emb_dim}, 0.02f);
}

std::vector<TensorRef<float>> UNet::parameters() const {
    std::vector<TensorRef<float>> out;
    out.reserve(named_.size());
    for (const auto& [name, t] : named_) out.push_back(t);
    return out;
}

int64_t UNet::parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : named_) n += t->size();
    return n;
}

TensorRef<float> UNet::run_conv(Tape<float>& tape, const TensorRef<float>& x,
                                const Conv& c) const {
    return add_bias_chw(tape, conv2d(tape, x, c.w, c.stride), c.b);
}

TensorRef<float> UNet::run_norm(Tape<float>& tape, const TensorRef<float>& x,
                                const Norm& n) const {
    return group_norm(tape, x, n.g, n.b, cfg_.norm_groups);
}

TensorRef<float> UNet::run_res(Tape<float>& tape, const TensorRef<float>& x, const ResBlock& r,
                               const TensorRef<float>& emb) const {
    auto h = run_conv(tape, silu(tape, run_norm(tape, x, r.n1)), r.c1);
    auto e = add_bias_2d(tape, matmul(tape, silu(tape, emb), r.ew), r.eb);
    auto e4 = reshape(tape, e, {e->shape[0], e->shape[1], 1, 1});
    h = add(tape, h, broadcast_to(tape, e4, h->shape));
    h = run_conv(tape, silu(tape, run_norm(tape, h, r.n2)), r.c2);
    auto sk = r.skip ? conv2d(tape, x, r.skip, 1) : x;
    return add(tape, h, sk);
}

TensorRef<float> UNet::run_tconv(Tape<float>& tape, const TensorRef<float>& x,
                                 const TensorRef<float>& w, const TensorRef<float>& b) const {
    return add_bias_chw(tape, tconv2d(tape, x, w, 2, 1), b);
}

TensorRef<float> UNet::forward(Tape<float>& tape, const TensorRef<float>& x,
                               const std::vector<int>& t, const std::vector<int>& component_ids,
                               int batch, int views) const {
    const int bnd = x->shape[0];
    const int comps = cfg_.component_count;
    require(x->ndim() == 4 && x->shape[1] == cfg_.in_channels,
            "unet: input must be (B*N*D, " + std::to_string(cfg_.in_channels) + ", H, W), got " +
                shape_str(x->shape));
    require(bnd == batch * views * comps, "unet: leading dim != batch*views*components");
    require(static_cast<int>(t.size()) == bnd && static_cast<int>(component_ids.size()) == bnd,
            "unet: need one timestep and component id per image");
    require(x->shape[2] % 8 == 0 && x->shape[3] % 8 == 0,
            "unet: spatial dims must be multiples of 8, got " + shape_str(x->shape));
    for (int id : component_ids)
        require(id >= 0 && id < comps, "unet: component id " + std::to_string(id) +
                                           " outside [0, " + std::to_string(comps) + ")");

    // timestep embedding + learned component embedding (one-hot matmul keeps
    // the embedding table on the tape)
    auto emb_t = timestep_embedding(t, cfg_.emb_dim);
    auto h1 = add_bias_2d(tape, matmul(tape, emb_t, emb_w1_), emb_b1_);
    auto emb = add_bias_2d(tape, matmul(tape, silu(tape, h1), emb_w2_), emb_b2_);
    auto sel = make_tensor<float>({bnd, comps});
    for (int i = 0; i < bnd; ++i) sel->value[i * comps + component_ids[i]] = 1.f;
    emb = add(tape, emb, matmul(tape, sel, comp_embed_));

    auto s = run_conv(tape, x, stem_);
    auto e0 = run_res(tape, run_res(tape, s, rb0a_, emb), rb0b_, emb);
    auto d1 = run_conv(tape, e0, down0_);
    auto e1 = run_res(tape, run_res(tape, d1, rb1a_, emb), rb1b_, emb);
    auto d2 = run_conv(tape, e1, down1_);
    auto e2 = run_res(tape, run_res(tape, d2, rb2a_, emb), rb2b_, emb);
    auto mid = attn_lo_.apply(tape, e2, batch, views, comps);

    auto u1 = run_tconv(tape, mid, up1_w_, up1_b_);
    auto c1 = concat(tape, {u1, e1}, 1);
    auto p1 = run_res(tape, run_res(tape, c1, rb3a_, emb), rb3b_, emb);
    p1 = attn_mid_.apply(tape, p1, batch, views, comps);

    auto u0 = run_tconv(tape, p1, up0_w_, up0_b_);
    auto c0 = concat(tape, {u0, e0}, 1);
    auto p0 = run_res(tape, run_res(tape, c0, rb4a_, emb), rb4b_, emb);

    auto full = run_tconv(tape, p0, upf_w_, upf_b_);
    auto out = run_conv(tape, silu(tape, run_norm(tape, full, head_norm_)), head_);
    return out;
}

} // namespace irid
