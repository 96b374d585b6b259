#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "irid/core/color.hpp"
#include "irid/core/error.hpp"
#include "irid/invopt/optimize.hpp"
#include "irid/invopt/relight.hpp"
#include "irid/math/rng.hpp"
#include "irid/render/integrators.hpp"
#include "irid/tensor/gradcheck.hpp"

using namespace irid;

namespace {

// Smooth low-frequency environment: dim base plus two colored cosine lobes.
EnvironmentMap lobe_env(int res, const Vec3& base, const Vec3& c1, const Vec3& d1,
                        const Vec3& c2, const Vec3& d2) {
    EnvironmentMap env;
    env.resolution = res;
    env.faces.assign(6, Image(res, res, 3));
    Vec3 l1 = normalize(d1), l2 = normalize(d2);
    for (int f = 0; f < 6; ++f)
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) {
                Vec3 d = normalize(face_uv_to_dir(f, (x + 0.5f) / res, (y + 0.5f) / res));
                float w1 = std::max(dot(d, l1), 0.f);
                float w2 = std::max(dot(d, l2), 0.f);
                env.faces[f].set_pixel(x, y, base + c1 * (w1 * w1) + c2 * (w2 * w2));
            }
    prefilter_env(env);
    return env;
}

EnvironmentMap default_env() {
    return lobe_env(16, {0.15f, 0.16f, 0.18f}, {0.75f, 0.55f, 0.25f}, {0.5f, 0.7f, 0.5f},
                    {0.2f, 0.35f, 0.7f}, {-0.6f, 0.2f, 0.77f});
}

EnvironmentMap second_env() {
    return lobe_env(16, {0.2f, 0.14f, 0.12f}, {0.25f, 0.65f, 0.75f}, {-0.7f, 0.4f, 0.59f},
                    {0.7f, 0.3f, 0.15f}, {0.65f, -0.1f, 0.75f});
}

// Sphere-cap normal field centered at (cx, cy) with radius rad; smooth
// interior-valued materials everywhere on the cap.
struct CapSpec {
    float cx, cy, rad;
    Vec3 albedo0, albedo1;  // lerped across x
    float rough0, rough1;   // lerped across y
    float metal;
};

IntrinsicSet cap_maps(int w, int h, const std::vector<CapSpec>& caps) {
    IntrinsicSet s;
    s.albedo = Image(w, h, 3, 1.f);
    s.normal = Image(w, h, 3, 0.f);
    s.roughness = Image(w, h, 1, 1.f);
    s.metallic = Image(w, h, 1, 1.f);
    s.mask = Image(w, h, 1, 0.f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (const CapSpec& c : caps) {
                float dx = (x + 0.5f - c.cx) / c.rad;
                float dy = (y + 0.5f - c.cy) / c.rad;
                float r2 = dx * dx + dy * dy;
                if (r2 > 0.9f) continue;
                float tx = std::clamp(0.5f + 0.5f * dx, 0.f, 1.f);
                float ty = std::clamp(0.5f + 0.5f * dy, 0.f, 1.f);
                s.normal.set_pixel(x, y, normalize(Vec3{dx, -dy, std::sqrt(1.f - r2)}));
                s.albedo.set_pixel(x, y, c.albedo0 + (c.albedo1 - c.albedo0) * tx);
                s.roughness.at(x, y, 0) = c.rough0 + (c.rough1 - c.rough0) * ty;
                s.metallic.at(x, y, 0) = c.metal;
                s.mask.at(x, y, 0) = 1.f;
                break;
            }
    return s;
}

IntrinsicSet one_cap(int w, int h) {
    return cap_maps(w, h,
                    {{w * 0.5f, h * 0.5f, w * 0.45f, {0.25f, 0.55f, 0.7f}, {0.75f, 0.4f, 0.25f},
                      0.3f, 0.65f, 0.35f}});
}

// neutral starting point sharing the fixed normals/mask of `like`
IntrinsicSet neutral_init(const IntrinsicSet& like) {
    IntrinsicSet init = like;
    std::fill(init.albedo.data.begin(), init.albedo.data.end(), 0.5f);
    std::fill(init.roughness.data.begin(), init.roughness.data.end(), 0.5f);
    std::fill(init.metallic.data.begin(), init.metallic.data.end(), 0.5f);
    return init;
}

InvObservation observe(const IntrinsicSet& maps, const EnvironmentMap& env, int light_id = 0) {
    return {relight(maps, env), light_id, std::nullopt};
}

// masked MSE between two images over channels
double masked_mse(const Image& a, const Image& b, const Image& mask) {
    REQUIRE(a.width == b.width);
    REQUIRE(a.channels == b.channels);
    double acc = 0;
    int64_t n = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            if (mask.at(x, y, 0) <= 0.5f) continue;
            for (int c = 0; c < a.channels; ++c) {
                double d = double(a.at(x, y, c)) - double(b.at(x, y, c));
                acc += d * d;
                ++n;
            }
        }
    REQUIRE(n > 0);
    return acc / double(n);
}

double to_double_mse(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / double(a.size());
}

} // namespace

TEST_CASE("differentiable shader matches the reference split-sum renderer") {
    IntrinsicSet maps = one_cap(24, 24);
    EnvironmentMap env = default_env();
    DiffRenderGeom geom = build_pixel_geom(maps.normal, {}, maps.mask, env.resolution);
    REQUIRE(geom.count > 200);
    EnvFeatures feats = env_features(env);

    auto run_with_rough = [&](float rough_override) {
        auto a = make_tensor<double>({geom.count, 3});
        auto r = make_tensor<double>({geom.count, 1});
        auto m = make_tensor<double>({geom.count, 1});
        for (int p = 0; p < geom.count; ++p) {
            int pid = geom.pixels[p];
            for (int c = 0; c < 3; ++c) a->value[p * 3 + c] = maps.albedo.data[pid * 3 + c];
            r->value[p] = rough_override >= 0.f ? rough_override : maps.roughness.data[pid];
            m->value[p] = maps.metallic.data[pid];
        }
        TapeD tape;
        TensorD rgb = render_pixels(tape, geom, feats, a, r, m);
        TensorD tone = tonemap_t(tape, rgb);
        double worst_hdr = 0, worst_tone = 0;
        for (int p = 0; p < geom.count; ++p) {
            int pid = geom.pixels[p];
            int x = pid % maps.width(), y = pid / maps.width();
            BrdfParams params{maps.albedo.pixel(x, y),
                              rough_override >= 0.f ? rough_override : maps.roughness.at(x, y, 0),
                              maps.metallic.at(x, y, 0)};
            Vec3 want = render_splitsum(maps.normal.pixel(x, y), {0.f, 0.f, 1.f}, params, env, {},
                                        {0.f, 0.f, 0.f});
            Vec3 want_tone = tonemap(want);
            const float* wv = &want.x;
            const float* wt = &want_tone.x;
            for (int c = 0; c < 3; ++c) {
                worst_hdr = std::max(worst_hdr, std::abs(rgb->value[p * 3 + c] - double(wv[c])));
                worst_tone =
                    std::max(worst_tone, std::abs(tone->value[p * 3 + c] - double(wt[c])));
            }
        }
        CHECK(worst_hdr < 2e-4);
        CHECK(worst_tone < 2e-4);
    };

    run_with_rough(-1.f);  // the map's own mixed roughness
    // pins the tent blend at and between every prefiltered level
    for (float rough : {0.f, 0.1f, 0.25f, 0.4f, 0.5f, 0.75f, 0.9f, 1.f}) run_with_rough(rough);
}

TEST_CASE("trainable environment features reproduce the prefiltered chain") {
    EnvironmentMap env = default_env();  // res 16, already prefiltered
    const EnvOperators& ops = env_operators(16);
    // logits that decode to exactly the reference faces
    auto logits = make_tensor<double>({6 * 16 * 16, 3}, true);
    int64_t p = 0;
    for (const Image& f : env.faces)
        for (float v : f.data) logits->value[p++] = std::log(std::expm1(double(v)));
    REQUIRE(p == logits->size());

    TapeD tape;
    EnvFeatures got = env_features(tape, ops, logits);
    EnvFeatures want = env_features(env);

    double worst_m0 = 0;
    for (int64_t i = 0; i < want.mips[0]->size(); ++i)
        worst_m0 = std::max(worst_m0, std::abs(got.mips[0]->value[i] - want.mips[0]->value[i]));
    CHECK(worst_m0 < 1e-6);  // identity level: just the softplus round trip

    for (int m = 1; m < EnvironmentMap::kMipCount; ++m) {
        REQUIRE(got.mips[m]->shape == want.mips[m]->shape);
        double worst = 0;
        for (int64_t i = 0; i < want.mips[m]->size(); ++i)
            worst = std::max(worst, std::abs(got.mips[m]->value[i] - want.mips[m]->value[i]) /
                                        std::max(1.0, std::abs(want.mips[m]->value[i])));
        CAPTURE(m);
        CHECK(worst < 5e-4);
    }
    double worst_irr = 0;
    REQUIRE(got.irr->shape == want.irr->shape);
    for (int64_t i = 0; i < want.irr->size(); ++i)
        worst_irr = std::max(worst_irr, std::abs(got.irr->value[i] - want.irr->value[i]) /
                                            std::max(1.0, std::abs(want.irr->value[i])));
    CHECK(worst_irr < 5e-4);
}

TEST_CASE("full render loss gradient passes finite differences") {
    // small cap, trainable environment, prior — the complete objective
    IntrinsicSet maps = one_cap(10, 10);
    EnvironmentMap env = lobe_env(8, {0.2f, 0.2f, 0.22f}, {0.5f, 0.4f, 0.2f}, {0.4f, 0.6f, 0.6f},
                                  {0.15f, 0.3f, 0.5f}, {-0.5f, 0.3f, 0.8f});
    InvObservation obs = observe(maps, env);

    const int env_res = 8;
    DiffRenderGeom geom = build_pixel_geom(maps.normal, {}, maps.mask, env_res);
    const int pm = geom.count;
    REQUIRE(pm > 10);
    const EnvOperators& ops = env_operators(env_res);

    Pcg32 rng(3, 0x1450);
    auto al = make_tensor<double>({pm, 3}, true);
    auto rl = make_tensor<double>({pm, 1}, true);
    auto ml = make_tensor<double>({pm, 1}, true);
    for (auto& v : al->value) v = 0.4 * rng.next_gaussian_double();
    for (auto& v : ml->value) v = 0.4 * rng.next_gaussian_double();
    for (int i = 0; i < pm; ++i) {
        // roughness logits nudged off the mip-tent and table knots so central
        // differences never straddle a kink
        double r = 0.15 + 0.7 * rng.next_double();
        double c = r * 4.0;
        if (std::abs(c - std::round(c)) < 0.02) r += 0.01;
        double y = r * 64.0 - 0.5;
        double fy = y - std::floor(y);
        if (fy < 0.05 || fy > 0.95) r += 0.003;
        rl->value[i] = std::log(r / (1.0 - r));
    }
    auto el = make_tensor<double>({6 * env_res * env_res, 3}, true);
    for (auto& v : el->value) v = -0.5 + 0.3 * rng.next_gaussian_double();

    auto target = make_tensor<double>({pm, 3});
    for (int p = 0; p < pm; ++p)
        for (int c = 0; c < 3; ++c)
            target->value[p * 3 + c] = obs.rgb.data[geom.pixels[p] * 3 + c];
    auto label_a = make_tensor<double>({pm, 3});
    auto label_r = make_tensor<double>({pm, 1});
    auto label_m = make_tensor<double>({pm, 1});
    for (auto& v : label_a->value) v = 0.3 + 0.4 * rng.next_double();
    for (auto& v : label_r->value) v = 0.3 + 0.4 * rng.next_double();
    for (auto& v : label_m->value) v = 0.3 + 0.4 * rng.next_double();

    auto build = [&](TapeD& tape) {
        EnvFeatures feats = env_features(tape, ops, el);
        TensorD a = sigmoid(tape, al);
        TensorD r = sigmoid(tape, rl);
        TensorD m = sigmoid(tape, ml);
        TensorD pred = tonemap_t(tape, render_pixels(tape, geom, feats, a, r, m));
        TensorD d = sub(tape, pred, target);
        TensorD loss = affine(tape, sum(tape, mul(tape, d, d)), 1.0 / (3.0 * pm), 0.0);
        TensorD da = sub(tape, a, label_a);
        TensorD dr = sub(tape, r, label_r);
        TensorD dm = sub(tape, m, label_m);
        loss = add(tape, loss,
                   affine(tape, sum(tape, mul(tape, da, da)), 0.1 / (3.0 * pm), 0.0));
        loss = add(tape, loss,
                   affine(tape,
                          add(tape, sum(tape, mul(tape, dr, dr)), sum(tape, mul(tape, dm, dm))),
                          0.5 / pm, 0.0));
        return loss;
    };

    double err_a = grad_check_max_err<double>({al}, build);
    double err_r = grad_check_max_err<double>({rl}, build);
    double err_m = grad_check_max_err<double>({ml}, build);
    MESSAGE("gradient errors: albedo " << err_a << " rough " << err_r << " metal " << err_m);
    CHECK(err_a < 1e-4);
    CHECK(err_r < 1e-4);
    CHECK(err_m < 1e-4);
    // environment logits: spot-check a slice (full cube is slow under FD)
    auto el_probe = make_tensor<double>({12, 3}, true);
    for (int64_t i = 0; i < el_probe->size(); ++i) el_probe->value[i] = el->value[i];
    auto build_env = [&](TapeD& tape) {
        auto rest = slice(tape, el, 0, 12, 6 * env_res * env_res - 12);
        auto full = concat(tape, {el_probe, rest}, 0);
        EnvFeatures feats = env_features(tape, ops, full);
        TensorD a = sigmoid(tape, al);
        TensorD r = sigmoid(tape, rl);
        TensorD m = sigmoid(tape, ml);
        TensorD pred = tonemap_t(tape, render_pixels(tape, geom, feats, a, r, m));
        TensorD d = sub(tape, pred, target);
        return affine(tape, sum(tape, mul(tape, d, d)), 1.0 / (3.0 * pm), 0.0);
    };
    double err_e = grad_check_max_err<double>({el_probe}, build_env);
    MESSAGE("gradient error: env logits " << err_e);
    CHECK(err_e < 1e-4);
}

TEST_CASE("generate-then-invert recovers albedo with known environments") {
    IntrinsicSet gt = one_cap(24, 24);
    std::vector<EnvironmentMap> envs{default_env(), second_env()};
    std::vector<InvObservation> obs{observe(gt, envs[0], 0), observe(gt, envs[1], 1)};

    InvOptions opt;
    opt.iters = 500;
    opt.lr = 0.01;
    opt.known_envs = envs;
    OptimState st = optimize(obs, neutral_init(gt), nullptr, opt);
    REQUIRE(st.loss_trace.size() == 500);
    CHECK_FALSE(st.diverged);
    CHECK(st.loss_trace.back() < st.loss_trace.front());

    IntrinsicSet rec = st.decode_maps();
    double albedo_mse = masked_mse(rec.albedo, gt.albedo, st.opt_mask);
    double rough_mse = masked_mse(rec.roughness, gt.roughness, st.opt_mask);
    double metal_mse = masked_mse(rec.metallic, gt.metallic, st.opt_mask);
    MESSAGE("recovery mse: albedo " << albedo_mse << " rough " << rough_mse << " metal "
                                    << metal_mse << " final loss " << st.loss_trace.back());
    CHECK(albedo_mse < 1e-3);
}

TEST_CASE("an overwhelming prior pins the maps to the pseudo-labels") {
    IntrinsicSet gt = one_cap(16, 16);
    EnvironmentMap env = default_env();
    std::vector<InvObservation> obs{observe(gt, env)};

    IntrinsicSet labels = gt;
    for (auto& v : labels.albedo.data) v = std::clamp(v * 0.8f + 0.15f, 0.05f, 0.95f);
    for (auto& v : labels.roughness.data) v = 0.62f;
    for (auto& v : labels.metallic.data) v = 0.24f;
    PriorTerm prior{labels, 1e4, 1e4, 1e4};

    InvOptions opt;
    opt.iters = 800;
    opt.lr = 0.02;
    opt.known_envs = {env};
    OptimState st = optimize(obs, neutral_init(gt), &prior, opt);
    IntrinsicSet rec = st.decode_maps();
    double da = masked_mse(rec.albedo, labels.albedo, st.opt_mask);
    double dr = masked_mse(rec.roughness, labels.roughness, st.opt_mask);
    double dm = masked_mse(rec.metallic, labels.metallic, st.opt_mask);
    MESSAGE("distance to labels: albedo " << da << " rough " << dr << " metal " << dm);
    CHECK(da < 1e-4);
    CHECK(dr < 1e-4);
    CHECK(dm < 1e-4);
}

TEST_CASE("a positive prior pulls strictly closer to the pseudo-labels") {
    IntrinsicSet gt = one_cap(16, 16);
    EnvironmentMap env = default_env();
    std::vector<InvObservation> obs{observe(gt, env)};

    IntrinsicSet labels = gt;  // labels deliberately off the true optimum
    for (auto& v : labels.albedo.data) v = std::clamp(v + 0.12f, 0.05f, 0.95f);
    for (auto& v : labels.roughness.data) v = std::clamp(v - 0.1f, 0.05f, 0.95f);
    for (auto& v : labels.metallic.data) v = std::clamp(v + 0.15f, 0.05f, 0.95f);

    InvOptions opt;
    opt.iters = 300;
    opt.known_envs = {env};
    auto distance = [&](const OptimState& st) {
        IntrinsicSet rec = st.decode_maps();
        return masked_mse(rec.albedo, labels.albedo, st.opt_mask) +
               masked_mse(rec.roughness, labels.roughness, st.opt_mask) +
               masked_mse(rec.metallic, labels.metallic, st.opt_mask);
    };
    OptimState bare = optimize(obs, neutral_init(gt), nullptr, opt);
    PriorTerm prior{labels};  // default weights
    OptimState pulled = optimize(obs, neutral_init(gt), &prior, opt);
    double d0 = distance(bare), d1 = distance(pulled);
    MESSAGE("distance to labels: lambda=0 " << d0 << "  lambda>0 " << d1);
    CHECK(d1 < d0);
}

TEST_CASE("a non-finite loss halts with the trace and keeps the last state") {
    IntrinsicSet gt = one_cap(12, 12);
    EnvironmentMap env = default_env();
    InvObservation bad = observe(gt, env);
    bad.rgb.at(6, 6, 1) = std::numeric_limits<float>::quiet_NaN();

    InvOptions opt;
    opt.iters = 50;
    opt.known_envs = {env};
    OptimState st = optimize({bad}, neutral_init(gt), nullptr, opt);
    CHECK(st.diverged);
    REQUIRE(st.loss_trace.size() == 1);
    CHECK(std::isnan(st.loss_trace[0]));
    for (double v : st.albedo_logits->value) CHECK(v == 0.0);  // logit(0.5): no step taken
}

TEST_CASE("optimization is deterministic") {
    IntrinsicSet gt = one_cap(12, 12);
    EnvironmentMap env = default_env();
    std::vector<InvObservation> obs{observe(gt, env)};
    InvOptions opt;
    opt.iters = 25;
    opt.env_resolution = 8;  // trainable branch
    OptimState a = optimize(obs, neutral_init(gt), nullptr, opt);
    OptimState b = optimize(obs, neutral_init(gt), nullptr, opt);
    REQUIRE(a.loss_trace.size() == b.loss_trace.size());
    for (size_t i = 0; i < a.loss_trace.size(); ++i) CHECK(a.loss_trace[i] == b.loss_trace[i]);
    CHECK(a.albedo_logits->value == b.albedo_logits->value);
    CHECK(a.env_logits[0]->value == b.env_logits[0]->value);
}

TEST_CASE("decoded parameters stay in range for any logit values") {
    IntrinsicSet gt = one_cap(10, 10);
    EnvironmentMap env = default_env();
    InvOptions opt;
    opt.iters = 0;
    opt.env_resolution = 8;
    OptimState st = optimize({observe(gt, env)}, neutral_init(gt), nullptr, opt);
    Pcg32 rng(7, 0x7a);
    auto poke = [&](std::vector<double>& v) {
        for (auto& x : v) {
            switch (rng.next_below(4)) {
                case 0: x = 1e6; break;
                case 1: x = -1e6; break;
                case 2: x = 40.0; break;
                default: x = -40.0; break;
            }
        }
    };
    poke(st.albedo_logits->value);
    poke(st.rough_logits->value);
    poke(st.metal_logits->value);
    poke(st.env_logits[0]->value);
    IntrinsicSet rec = st.decode_maps();
    for (float v : rec.albedo.data) CHECK((v >= 0.f && v <= 1.f));
    for (float v : rec.roughness.data) CHECK((v >= 0.f && v <= 1.f));
    for (float v : rec.metallic.data) CHECK((v >= 0.f && v <= 1.f));
    EnvironmentMap dec = st.decode_env(0);
    for (const Image& f : dec.faces)
        for (float v : f.data) {
            CHECK(v >= 0.f);
            CHECK(std::isfinite(v));
        }
}

TEST_CASE("relighting is exactly linear in the environment radiance") {
    IntrinsicSet maps = one_cap(20, 20);
    EnvironmentMap env = default_env();
    EnvironmentMap doubled;
    doubled.resolution = env.resolution;
    doubled.faces = env.faces;
    for (Image& f : doubled.faces)
        for (float& v : f.data) v *= 2.f;
    prefilter_env(doubled);

    Image a = relight_hdr(maps, env);
    Image b = relight_hdr(maps, doubled);
    for (size_t i = 0; i < a.data.size(); ++i) CHECK(b.data[i] == 2.f * a.data[i]);

    EnvironmentMap black = make_constant_env({0.f, 0.f, 0.f}, 16);
    prefilter_env(black);
    Image dark = relight_hdr(maps, black);
    for (float v : dark.data) CHECK(v == 0.f);
}

TEST_CASE("relighting with the recovered state reproduces the observation") {
    IntrinsicSet gt = one_cap(20, 20);
    EnvironmentMap env = default_env();
    std::vector<InvObservation> obs{observe(gt, env)};
    InvOptions opt;
    opt.iters = 300;
    opt.lr = 0.02;
    opt.env_resolution = 16;  // environment optimized too
    OptimState st = optimize(obs, neutral_init(gt), nullptr, opt);
    CHECK_FALSE(st.diverged);

    Image replay = relight(st.decode_maps(), st.decode_env(0));
    double mse = masked_mse(replay, obs[0].rgb, st.opt_mask);
    MESSAGE("closure mse " << mse << " vs final loss " << st.loss_trace.back());
    CHECK(mse < st.loss_trace.back() * 1.5 + 1e-4);
}

TEST_CASE("material edits are exact, range-checked, and region-scoped") {
    IntrinsicSet maps = one_cap(18, 18);

    MaterialEdit ident;
    ident.channel = MaterialEdit::Channel::Albedo;
    ident.use_scale = true;
    ident.scale = 1.f;
    IntrinsicSet same = edit_material(maps, ident);
    CHECK(same.albedo.data == maps.albedo.data);
    CHECK(same.roughness.data == maps.roughness.data);
    CHECK(same.metallic.data == maps.metallic.data);

    // edits stay inside the region; everything else is bit-identical
    Image region(18, 18, 1, 0.f);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 18; ++x) region.at(x, y, 0) = 1.f;
    MaterialEdit half;
    half.channel = MaterialEdit::Channel::Roughness;
    half.region = region;
    half.value = {0.9f, 0.f, 0.f};
    IntrinsicSet edited = edit_material(maps, half);
    for (int y = 0; y < 18; ++y)
        for (int x = 0; x < 18; ++x) {
            bool inside = y < 9 && maps.foreground(x, y);
            if (inside) CHECK(edited.roughness.at(x, y, 0) == 0.9f);
            else CHECK(edited.roughness.at(x, y, 0) == maps.roughness.at(x, y, 0));
        }
    CHECK(edited.albedo.data == maps.albedo.data);

    MaterialEdit bad;
    bad.channel = MaterialEdit::Channel::Metallic;
    bad.value = {1.5f, 0.f, 0.f};
    CHECK_THROWS_AS(edit_material(maps, bad), Error);
    MaterialEdit bad_scale;
    bad_scale.channel = MaterialEdit::Channel::Albedo;
    bad_scale.use_scale = true;
    bad_scale.scale = 3.f;  // pushes channels past 1
    CHECK_THROWS_AS(edit_material(maps, bad_scale), Error);
}

TEST_CASE("full metallic kills the diffuse term in the relit image") {
    IntrinsicSet maps = one_cap(18, 18);
    EnvironmentMap env = default_env();
    MaterialEdit to_metal;
    to_metal.channel = MaterialEdit::Channel::Metallic;
    to_metal.value = {1.f, 0.f, 0.f};
    IntrinsicSet metal = edit_material(maps, to_metal);
    Image hdr = relight_hdr(metal, env);
    for (int y = 0; y < 18; ++y)
        for (int x = 0; x < 18; ++x) {
            if (!maps.foreground(x, y)) continue;
            Vec3 n = maps.normal.pixel(x, y);
            float rough = maps.roughness.at(x, y, 0);
            // remaining radiance must be the pure specular split-sum term
            Vec3 r = reflect({0.f, 0.f, 1.f}, n);
            float scale, bias;
            env.lut(std::min(dot(n, Vec3{0.f, 0.f, 1.f}), 1.f), rough, scale, bias);
            Vec3 spec = env.sample_prefiltered(r, rough) *
                        (maps.albedo.pixel(x, y) * scale + Vec3(bias));
            Vec3 got = hdr.pixel(x, y);
            CHECK(std::abs(got.x - spec.x) < 1e-6f);
            CHECK(std::abs(got.y - spec.y) < 1e-6f);
            CHECK(std::abs(got.z - spec.z) < 1e-6f);
        }
}

TEST_CASE("raising roughness flattens the brightest highlight") {
    // shiny cap under a concentrated source: blurring the lobe must lower the peak
    EnvironmentMap env = make_constant_env({0.04f, 0.04f, 0.045f}, 16);
    for (int y = 6; y < 10; ++y)
        for (int x = 6; x < 10; ++x) env.faces[4].set_pixel(x, y, {18.f, 17.f, 15.f});
    prefilter_env(env);

    IntrinsicSet maps = cap_maps(
        24, 24, {{12.f, 12.f, 10.5f, {0.85f, 0.85f, 0.85f}, {0.85f, 0.85f, 0.85f}, 0.2f, 0.2f,
                  0.9f}});
    MaterialEdit rough_up;
    rough_up.channel = MaterialEdit::Channel::Roughness;
    rough_up.value = {0.9f, 0.f, 0.f};
    Image shiny = relight_hdr(maps, env);
    Image matte = relight_hdr(edit_material(maps, rough_up), env);
    float peak_shiny = *std::max_element(shiny.data.begin(), shiny.data.end());
    float peak_matte = *std::max_element(matte.data.begin(), matte.data.end());
    MESSAGE("peak radiance: rough 0.2 " << peak_shiny << "  rough 0.9 " << peak_matte);
    CHECK(peak_shiny > peak_matte);
}

TEST_CASE("a second lighting condition disentangles metallic") {
    // metal sphere and dielectric sphere side by side, same view
    IntrinsicSet gt = cap_maps(
        40, 20, {{10.f, 10.f, 8.5f, {0.85f, 0.6f, 0.3f}, {0.85f, 0.6f, 0.3f}, 0.3f, 0.3f, 0.9f},
                 {30.f, 10.f, 8.5f, {0.7f, 0.25f, 0.2f}, {0.7f, 0.25f, 0.2f}, 0.5f, 0.5f, 0.1f}});
    std::vector<EnvironmentMap> envs{default_env(), second_env()};
    InvObservation first = observe(gt, envs[0], 0);
    InvObservation second = observe(gt, envs[1], 1);

    InvOptions opt;
    opt.iters = 400;
    opt.known_envs = envs;
    OptimState one = optimize({first}, neutral_init(gt), nullptr, opt);
    OptimState two = optimize({first, second}, neutral_init(gt), nullptr, opt);
    double mse_one = masked_mse(one.decode_maps().metallic, gt.metallic, one.opt_mask);
    double mse_two = masked_mse(two.decode_maps().metallic, gt.metallic, two.opt_mask);
    MESSAGE("metallic mse: one light " << mse_one << "  two lights " << mse_two);
    CHECK(mse_two < mse_one);
}

TEST_CASE("sphere-texture mode recovers maps seen from multiple cameras") {
    const int th = 12, tw = 24;
    IntrinsicSet gt;
    gt.albedo = Image(tw, th, 3);
    gt.normal = Image(tw, th, 3, 0.f);
    gt.roughness = Image(tw, th, 1);
    gt.metallic = Image(tw, th, 1);
    gt.mask = Image(tw, th, 1, 1.f);
    for (int i = 0; i < th; ++i)
        for (int j = 0; j < tw; ++j) {
            gt.albedo.set_pixel(j, i,
                                {0.2f + 0.6f * j / (tw - 1.f), 0.7f - 0.45f * i / (th - 1.f),
                                 0.35f + 0.3f * ((i + j) % 2)});
            gt.roughness.at(j, i, 0) = 0.35f + 0.3f * i / (th - 1.f);
            gt.metallic.at(j, i, 0) = 0.25f + 0.02f * (j % 3);
        }

    std::vector<EnvironmentMap> envs{default_env(), second_env()};
    Camera front;
    front.position = {0.f, 0.f, 4.f};
    front.look_at = {0.f, 0.f, 0.f};
    front.width = front.height = 28;
    Camera back = front;
    back.position = {0.5f, 0.3f, -4.f};

    // observations traced against the same sphere mapping the optimizer uses
    auto render_view_of = [&](const Camera& cam, const EnvironmentMap& env) {
        Image img(cam.width, cam.height, 3, 0.f);
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                Ray ray = cam.pixel_ray(x, y);
                float b = dot(ray.origin, ray.dir);
                float disc = b * b - (dot(ray.origin, ray.origin) - 1.f);
                if (disc <= 0.f) continue;
                float t = -b - std::sqrt(disc);
                if (t <= 1e-4f) continue;
                Vec3 n = normalize(ray.origin + t * ray.dir);
                float theta = std::acos(std::clamp(n.y, -1.f, 1.f));
                float phi = std::atan2(n.z, n.x);
                int i = std::clamp(int(theta / float(M_PI) * th), 0, th - 1);
                int j = std::clamp(int((phi + float(M_PI)) / (2.f * float(M_PI)) * tw), 0, tw - 1);
                BrdfParams params{gt.albedo.pixel(j, i), gt.roughness.at(j, i, 0),
                                  gt.metallic.at(j, i, 0)};
                img.set_pixel(x, y, tonemap(render_splitsum(n, -1.f * ray.dir, params, env, {},
                                                            {0.f, 0.f, 0.f})));
            }
        return img;
    };
    std::vector<InvObservation> obs;
    for (int e = 0; e < 2; ++e) {
        obs.push_back({render_view_of(front, envs[e]), e, front});
        obs.push_back({render_view_of(back, envs[e]), e, back});
    }

    InvOptions opt;
    opt.iters = 400;
    opt.lr = 0.02;
    opt.known_envs = envs;
    OptimState st = optimize(obs, neutral_init(gt), nullptr, opt);
    CHECK_FALSE(st.diverged);

    int covered = 0;
    for (float v : st.opt_mask.data) covered += v > 0.5f;
    MESSAGE("covered texels: " << covered << " of " << th * tw);
    CHECK(covered > th * tw / 3);  // two opposed views pin a good share of the sphere

    IntrinsicSet rec = st.decode_maps();
    double albedo_mse = masked_mse(rec.albedo, gt.albedo, st.opt_mask);
    MESSAGE("texture albedo mse " << albedo_mse << " final loss " << st.loss_trace.back());
    CHECK(albedo_mse < 1e-3);

    // a single camera pins down strictly fewer texels
    OptimState half = optimize({obs[0], obs[2]}, neutral_init(gt), nullptr, opt);
    int covered_half = 0;
    for (float v : half.opt_mask.data) covered_half += v > 0.5f;
    CHECK(covered_half < covered);
}

TEST_CASE("optimize rejects malformed problems") {
    IntrinsicSet gt = one_cap(12, 12);
    EnvironmentMap env = default_env();
    InvObservation ok = observe(gt, env);
    InvOptions frozen;
    frozen.known_envs = {env};
    frozen.iters = 1;

    CHECK_THROWS_AS(optimize({}, neutral_init(gt), nullptr, frozen), Error);

    InvObservation wrong_size = ok;
    wrong_size.rgb = Image(6, 6, 3, 0.5f);
    CHECK_THROWS_AS(optimize({wrong_size}, neutral_init(gt), nullptr, frozen), Error);

    InvObservation second_light = ok;
    second_light.light_id = 1;  // only one known environment supplied
    CHECK_THROWS_AS(optimize({ok, second_light}, neutral_init(gt), nullptr, frozen), Error);

    InvObservation with_cam = ok;
    with_cam.camera = Camera{};
    CHECK_THROWS_AS(optimize({ok, with_cam}, neutral_init(gt), nullptr, frozen), Error);

    EnvironmentMap raw = make_constant_env({0.5f, 0.5f, 0.5f}, 16);  // never prefiltered
    InvOptions unfiltered;
    unfiltered.known_envs = {raw};
    unfiltered.iters = 1;
    CHECK_THROWS_AS(optimize({ok}, neutral_init(gt), nullptr, unfiltered), Error);

    PriorTerm bad_prior{neutral_init(gt), -0.1, 0.1, 0.5};
    CHECK_THROWS_AS(optimize({ok}, neutral_init(gt), &bad_prior, frozen), Error);
    PriorTerm small_prior{one_cap(6, 6)};
    CHECK_THROWS_AS(optimize({ok}, neutral_init(gt), &small_prior, frozen), Error);

    InvOptions bad_lr = frozen;
    bad_lr.lr = 0.0;
    CHECK_THROWS_AS(optimize({ok}, neutral_init(gt), nullptr, bad_lr), Error);

    // zero iterations is a valid no-op
    InvOptions noop = frozen;
    noop.iters = 0;
    OptimState st = optimize({ok}, neutral_init(gt), nullptr, noop);
    CHECK(st.loss_trace.empty());
    CHECK_FALSE(st.diverged);
}
