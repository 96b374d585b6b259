#include "irid/invopt/optimize.hpp"

#include <cmath>
#include <cstdio>

#include "irid/core/error.hpp"
#include "irid/tensor/optim.hpp"

namespace irid {

namespace {

double logit(double p) {
    p = std::clamp(p, 1e-4, 1.0 - 1e-4);
    return std::log(p / (1.0 - p));
}

double sigmoid_v(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus_v(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// texel-center normal of an equirectangular sphere texture (y is the pole)
Vec3 sphere_texel_normal(int i, int j, int h, int w) {
    float theta = static_cast<float>(M_PI) * (i + 0.5f) / h;
    float phi = 2.f * static_cast<float>(M_PI) * (j + 0.5f) / w - static_cast<float>(M_PI);
    float st = std::sin(theta);
    return {st * std::cos(phi), std::cos(theta), st * std::sin(phi)};
}

// One observation wired into the shared problem: frozen geometry, the target
// pixels, and the gather that pulls its pixels out of the parameter maps.
struct Slot {
    DiffRenderGeom geom;
    TensorD rgb;                // (count, 3) target
    std::vector<int> sel_idx;   // count taps (k=1) into the map rows
    std::vector<double> sel_w;
    int env = 0;
};

TensorD slot_target(const Image& rgb, const std::vector<int>& pixels) {
    auto t = make_tensor<double>({static_cast<int>(pixels.size()), 3});
    for (size_t p = 0; p < pixels.size(); ++p)
        for (int c = 0; c < 3; ++c)
            t->value[p * 3 + c] = rgb.data[static_cast<size_t>(pixels[p]) * 3 + c];
    return t;
}

void check_maps(const IntrinsicSet& s, const char* what) {
    require(s.albedo.channels == 3 && s.normal.channels == 3 && s.roughness.channels == 1 &&
                s.metallic.channels == 1 && s.mask.channels == 1,
            std::string(what) + ": maps must be albedo/normal 3-channel, "
                                "roughness/metallic/mask 1-channel");
    int w = s.albedo.width, h = s.albedo.height;
    require(s.normal.width == w && s.normal.height == h && s.roughness.width == w &&
                s.roughness.height == h && s.metallic.width == w && s.metallic.height == h &&
                s.mask.width == w && s.mask.height == h,
            std::string(what) + ": all maps must share one resolution");
}

} // namespace

IntrinsicSet OptimState::decode_maps() const {
    IntrinsicSet out = base;
    for (size_t r = 0; r < map_pixels.size(); ++r) {
        int pid = map_pixels[r];
        for (int c = 0; c < 3; ++c)
            out.albedo.data[static_cast<size_t>(pid) * 3 + c] =
                static_cast<float>(sigmoid_v(albedo_logits->value[r * 3 + c]));
        out.roughness.data[pid] = static_cast<float>(sigmoid_v(rough_logits->value[r]));
        out.metallic.data[pid] = static_cast<float>(sigmoid_v(metal_logits->value[r]));
    }
    return out;
}

EnvironmentMap OptimState::decode_env(int light_id) const {
    if (!frozen_envs.empty()) {
        require(light_id >= 0 && light_id < static_cast<int>(frozen_envs.size()),
                "decode_env: unknown light id " + std::to_string(light_id));
        return frozen_envs[light_id];
    }
    require(light_id >= 0 && light_id < static_cast<int>(env_logits.size()),
            "decode_env: unknown light id " + std::to_string(light_id));
    const auto& logits = env_logits[light_id];
    EnvironmentMap env;
    env.resolution = env_resolution;
    env.faces.assign(6, Image(env_resolution, env_resolution, 3));
    int64_t p = 0;
    for (Image& f : env.faces)
        for (int y = 0; y < env_resolution; ++y)
            for (int x = 0; x < env_resolution; ++x, ++p)
                f.set_pixel(x, y,
                            {static_cast<float>(softplus_v(logits->value[p * 3 + 0])),
                             static_cast<float>(softplus_v(logits->value[p * 3 + 1])),
                             static_cast<float>(softplus_v(logits->value[p * 3 + 2]))});
    prefilter_env(env);
    return env;
}

OptimState optimize(const std::vector<InvObservation>& observations, const IntrinsicSet& init,
                    const PriorTerm* prior, const InvOptions& options) {
    require(!observations.empty(), "optimize: need at least one observation");
    require(options.iters >= 0 && options.lr > 0.0, "optimize: iters must be >= 0 and lr > 0");
    check_maps(init, "optimize: init");

    const bool textured = observations[0].camera.has_value();
    int max_light = 0;
    for (const auto& o : observations) {
        require(o.rgb.channels == 3, "optimize: observations must be 3-channel rgb");
        require(o.camera.has_value() == textured,
                "optimize: observations must either all carry cameras or none");
        require(o.light_id >= 0, "optimize: light ids must be >= 0");
        max_light = std::max(max_light, o.light_id);
    }
    const int n_env = max_light + 1;

    const bool frozen = !options.known_envs.empty();
    int env_res = options.env_resolution;
    if (frozen) {
        require(static_cast<int>(options.known_envs.size()) >= n_env,
                "optimize: " + std::to_string(n_env) + " lighting conditions but only " +
                    std::to_string(options.known_envs.size()) + " known environments");
        for (const auto& e : options.known_envs)
            require(e.prefiltered_ready() && !e.irradiance.empty() && !e.lut_scale.data.empty(),
                    "optimize: known environments must be prefiltered");
        env_res = options.known_envs[0].resolution;
    }

    OptimState st;
    st.width = init.width();
    st.height = init.height();
    st.base = init;
    st.env_resolution = env_res;
    if (frozen)
        st.frozen_envs.assign(options.known_envs.begin(), options.known_envs.begin() + n_env);

    // ---- frozen geometry + the gather from map rows to observation pixels
    std::vector<Slot> slots(observations.size());
    if (!textured) {
        for (const auto& o : observations)
            require(o.rgb.width == st.width && o.rgb.height == st.height,
                    "optimize: observations must share the parameter maps' resolution");
        DiffRenderGeom geom =
            build_pixel_geom(init.normal, options.view_dirs, init.mask, env_res);
        require(geom.count > 0, "optimize: no shaded foreground pixels");
        st.map_pixels = geom.pixels;
        for (size_t s = 0; s < observations.size(); ++s) {
            slots[s].geom = geom;
            slots[s].rgb = slot_target(observations[s].rgb, geom.pixels);
            slots[s].env = observations[s].light_id;
            slots[s].sel_idx.resize(geom.count);
            slots[s].sel_w.assign(geom.count, 1.0);
            for (int i = 0; i < geom.count; ++i) slots[s].sel_idx[i] = i;
        }
    } else {
        // unit sphere at the origin, parameter maps on an equirect texture
        const int th = st.height, tw = st.width;
        std::vector<int> texel_row(static_cast<size_t>(th) * tw, -1);  // texel -> map row
        std::vector<std::vector<int>> obs_texels(observations.size());
        for (size_t s = 0; s < observations.size(); ++s) {
            const Camera& cam = *observations[s].camera;
            cam.validate();
            require(observations[s].rgb.width == cam.width &&
                        observations[s].rgb.height == cam.height,
                    "optimize: observation rgb must match its camera resolution");
            require(length(cam.position) > 1.f, "optimize: camera must be outside the sphere");
            std::vector<Vec3> ns, vs;
            std::vector<int> px;
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
                    int i = std::clamp(static_cast<int>(theta / static_cast<float>(M_PI) * th),
                                       0, th - 1);
                    int j = std::clamp(
                        static_cast<int>((phi + static_cast<float>(M_PI)) /
                                         (2.f * static_cast<float>(M_PI)) * tw),
                        0, tw - 1);
                    ns.push_back(n);
                    vs.push_back(-1.f * ray.dir);
                    px.push_back(y * cam.width + x);
                    obs_texels[s].push_back(i * tw + j);
                }
            slots[s].geom = build_geom_from_dirs(ns, vs, px, env_res);
            require(slots[s].geom.count == static_cast<int>(ns.size()),
                    "optimize: sphere hits must all face their camera");
            require(slots[s].geom.count > 0, "optimize: camera does not see the sphere");
            slots[s].rgb = slot_target(observations[s].rgb, slots[s].geom.pixels);
            slots[s].env = observations[s].light_id;
        }
        for (const auto& texels : obs_texels)
            for (int t : texels)
                if (texel_row[t] < 0) {
                    texel_row[t] = static_cast<int>(st.map_pixels.size());
                    st.map_pixels.push_back(t);
                }
        for (size_t s = 0; s < observations.size(); ++s) {
            slots[s].sel_idx.reserve(obs_texels[s].size());
            slots[s].sel_w.assign(obs_texels[s].size(), 1.0);
            for (int t : obs_texels[s]) slots[s].sel_idx.push_back(texel_row[t]);
        }
        for (int i = 0; i < th; ++i)
            for (int j = 0; j < tw; ++j)
                st.base.normal.set_pixel(j, i, sphere_texel_normal(i, j, th, tw));
    }

    st.opt_mask = Image(st.width, st.height, 1, 0.f);
    for (int pid : st.map_pixels) st.opt_mask.data[pid] = 1.f;

    // ---- logits from the initial maps
    const int pm = static_cast<int>(st.map_pixels.size());
    st.albedo_logits = make_tensor<double>({pm, 3}, true);
    st.rough_logits = make_tensor<double>({pm, 1}, true);
    st.metal_logits = make_tensor<double>({pm, 1}, true);
    for (int r = 0; r < pm; ++r) {
        int pid = st.map_pixels[r];
        for (int c = 0; c < 3; ++c)
            st.albedo_logits->value[r * 3 + c] =
                logit(init.albedo.data[static_cast<size_t>(pid) * 3 + c]);
        st.rough_logits->value[r] = logit(init.roughness.data[pid]);
        st.metal_logits->value[r] = logit(init.metallic.data[pid]);
    }

    std::vector<TensorD> params{st.albedo_logits, st.rough_logits, st.metal_logits};
    const EnvOperators* ops = nullptr;
    std::vector<EnvFeatures> fixed_features;
    if (frozen) {
        for (int e = 0; e < n_env; ++e) fixed_features.push_back(env_features(st.frozen_envs[e]));
    } else {
        require(options.env_init > 0.0, "optimize: env_init must be positive");
        ops = &env_operators(env_res);
        double init_logit = std::log(std::expm1(options.env_init));
        for (int e = 0; e < n_env; ++e) {
            auto logits = full_like_shape<double>({6 * env_res * env_res, 3}, init_logit, true);
            st.env_logits.push_back(logits);
            params.push_back(logits);
        }
    }

    // ---- prior targets on the map rows (per-pixel mode only)
    TensorD la, lr, lm;
    if (prior) {
        require(!textured, "optimize: the pseudo-label prior applies to per-pixel maps only");
        check_maps(prior->labels, "optimize: prior labels");
        require(prior->labels.width() == st.width && prior->labels.height() == st.height,
                "optimize: prior labels must match the parameter maps' resolution");
        require(prior->lambda_albedo >= 0.0 && prior->lambda_normal >= 0.0 &&
                    prior->lambda_mr >= 0.0,
                "optimize: prior weights must be >= 0");
        la = make_tensor<double>({pm, 3});
        lr = make_tensor<double>({pm, 1});
        lm = make_tensor<double>({pm, 1});
        for (int r = 0; r < pm; ++r) {
            int pid = st.map_pixels[r];
            for (int c = 0; c < 3; ++c)
                la->value[r * 3 + c] = prior->labels.albedo.data[static_cast<size_t>(pid) * 3 + c];
            lr->value[r] = prior->labels.roughness.data[pid];
            lm->value[r] = prior->labels.metallic.data[pid];
        }
    }

    int64_t data_elems = 0;
    for (const auto& s : slots) data_elems += static_cast<int64_t>(s.geom.count) * 3;

    AdamState<double> adam;
    AdamConfig acfg;
    acfg.lr = options.lr;
    acfg.weight_decay = 0.0;

    for (int it = 0; it < options.iters; ++it) {
        TapeD tape;
        std::vector<EnvFeatures> feats;
        if (frozen) {
            feats = fixed_features;
        } else {
            for (int e = 0; e < n_env; ++e)
                feats.push_back(env_features(tape, *ops, st.env_logits[e]));
        }
        TensorD a = sigmoid(tape, st.albedo_logits);
        TensorD r = sigmoid(tape, st.rough_logits);
        TensorD m = sigmoid(tape, st.metal_logits);

        TensorD se;
        for (const auto& s : slots) {
            TensorD ao = gather_weighted(tape, a, s.sel_idx, s.sel_w, 1);
            TensorD ro = gather_weighted(tape, r, s.sel_idx, s.sel_w, 1);
            TensorD mo = gather_weighted(tape, m, s.sel_idx, s.sel_w, 1);
            TensorD pred = tonemap_t(tape, render_pixels(tape, s.geom, feats[s.env], ao, ro, mo));
            TensorD d = sub(tape, pred, s.rgb);
            TensorD part = sum(tape, mul(tape, d, d));
            se = se ? add(tape, se, part) : part;
        }
        TensorD loss = affine(tape, se, 1.0 / static_cast<double>(data_elems), 0.0);
        if (prior) {
            TensorD da = sub(tape, a, la);
            TensorD dr = sub(tape, r, lr);
            TensorD dm = sub(tape, m, lm);
            loss = add(tape, loss,
                       affine(tape, sum(tape, mul(tape, da, da)),
                              prior->lambda_albedo / (3.0 * pm), 0.0));
            loss = add(tape, loss,
                       affine(tape, add(tape, sum(tape, mul(tape, dr, dr)),
                                        sum(tape, mul(tape, dm, dm))),
                              prior->lambda_mr / pm, 0.0));
        }

        double lv = loss->value[0];
        st.loss_trace.push_back(lv);
        if (!std::isfinite(lv)) {
            st.diverged = true;
            break;
        }
        if (options.log_every > 0 && it % options.log_every == 0)
            std::printf("iter %d  loss %.6f\n", it, lv);

        zero_grad(params);
        tape.backward(loss);
        adam_step(params, adam, acfg);
    }
    return st;
}

} // namespace irid
