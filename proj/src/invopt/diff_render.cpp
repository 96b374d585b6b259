#include "irid/invopt/diff_render.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "irid/core/error.hpp"
#include "irid/render/brdf.hpp"

namespace irid {

namespace {

constexpr int kMips = EnvironmentMap::kMipCount;

// The BRDF integration table is environment-independent; share one copy.
const std::pair<Image, Image>& shared_brdf_lut() {
    static std::pair<Image, Image> lut = [] {
        std::pair<Image, Image> t;
        build_brdf_lut(t.first, t.second, EnvironmentMap::kLutRes, 1024);
        return t;
    }();
    return lut;
}

// Texel-center direction and solid angle for every texel of a face set.
struct TexelGrid {
    std::vector<Vec3> dir;
    std::vector<float> domega;
};

TexelGrid texel_grid(int res) {
    TexelGrid g;
    g.dir.reserve(static_cast<size_t>(6) * res * res);
    g.domega.reserve(g.dir.capacity());
    for (int f = 0; f < 6; ++f)
        for (int j = 0; j < res; ++j)
            for (int i = 0; i < res; ++i) {
                g.dir.push_back(
                    normalize(face_uv_to_dir(f, (i + 0.5f) / res, (j + 0.5f) / res)));
                g.domega.push_back(texel_solid_angle(i, j, res));
            }
    return g;
}

// One row-normalized convolution row: out texel direction n against every
// source texel, GGX-weighted (alpha > 0) or cosine-weighted (alpha <= 0).
void filter_row(const Vec3& n, const TexelGrid& src, float alpha, double* row) {
    const size_t t = src.dir.size();
    float wsum = 0.f;
    std::vector<float> w(t, 0.f);
    for (size_t s = 0; s < t; ++s) {
        float nol = dot(n, src.dir[s]);
        if (nol <= 0.f) continue;
        float wi = nol * src.domega[s];
        if (alpha > 0.f) {
            Vec3 h = normalize(n + src.dir[s]);
            wi *= ggx_d(std::clamp(dot(n, h), 0.f, 1.f), alpha);
        }
        w[s] = wi;
        wsum += wi;
    }
    if (wsum > 0.f)
        for (size_t s = 0; s < t; ++s) row[s] = static_cast<double>(w[s]) / wsum;
}

TensorD filter_matrix(int out_res, const TexelGrid& src, float alpha) {
    const int rows = 6 * out_res * out_res;
    const int cols = static_cast<int>(src.dir.size());
    auto m = make_tensor<double>({rows, cols});
    int r = 0;
    for (int f = 0; f < 6; ++f)
        for (int j = 0; j < out_res; ++j)
            for (int i = 0; i < out_res; ++i, ++r) {
                Vec3 n = normalize(face_uv_to_dir(f, (i + 0.5f) / out_res, (j + 0.5f) / out_res));
                filter_row(n, src, alpha, m->value.data() + static_cast<int64_t>(r) * cols);
            }
    return m;
}

TensorD faces_tensor(const std::vector<Image>& faces) {
    int res = faces[0].width;
    auto t = make_tensor<double>({6 * res * res, 3});
    int64_t p = 0;
    for (const Image& f : faces)
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x, ++p) {
                Vec3 v = f.pixel(x, y);
                t->value[p * 3 + 0] = v.x;
                t->value[p * 3 + 1] = v.y;
                t->value[p * 3 + 2] = v.z;
            }
    return t;
}

} // namespace

std::array<int, EnvironmentMap::kMipCount> prefiltered_mip_res(int env_res) {
    std::array<int, kMips> r{};
    r[0] = env_res;
    for (int m = 1; m < kMips; ++m) r[m] = std::max(env_res >> m, 4);
    return r;
}

void append_face_taps(const Vec3& dir, int res, PixelTaps& out) {
    float u, v;
    int f = dir_to_face(dir, u, v);
    float x = u * res - 0.5f, y = v * res - 0.5f;
    int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, res - 1);
    int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, res - 1);
    int x1 = std::min(x0 + 1, res - 1);
    int y1 = std::min(y0 + 1, res - 1);
    float fx = std::clamp(x - x0, 0.f, 1.f);
    float fy = std::clamp(y - y0, 0.f, 1.f);
    int base = f * res * res;
    out.idx.insert(out.idx.end(), {base + y0 * res + x0, base + y0 * res + x1,
                                   base + y1 * res + x0, base + y1 * res + x1});
    out.w.insert(out.w.end(), {double(1.f - fx) * double(1.f - fy), double(fx) * double(1.f - fy),
                               double(1.f - fx) * double(fy), double(fx) * double(fy)});
}

DiffRenderGeom build_geom_from_dirs(const std::vector<Vec3>& normals,
                                    const std::vector<Vec3>& views,
                                    const std::vector<int>& pixels, int env_res) {
    require(normals.size() == views.size() && normals.size() == pixels.size(),
            "render geometry: normals, views, and pixel ids must align");
    DiffRenderGeom g;
    g.mip_res = prefiltered_mip_res(env_res);
    g.irr_res = std::min(env_res, EnvironmentMap::kIrradianceRes);
    const auto& lut = shared_brdf_lut();
    const int lres = EnvironmentMap::kLutRes;
    for (size_t p = 0; p < normals.size(); ++p) {
        const Vec3& n = normals[p];
        const Vec3& v = views[p];
        float nov = dot(n, v);
        if (nov <= 0.f) continue;
        nov = std::min(nov, 1.f);
        Vec3 r = reflect(v, n);
        for (int m = 0; m < kMips; ++m) append_face_taps(r, g.mip_res[m], g.mip_taps[m]);
        append_face_taps(n, g.irr_res, g.irr_taps);
        // slice the BRDF table along roughness at this pixel's fixed n·v
        float x = std::clamp(nov, 0.f, 1.f) * lres - 0.5f;
        int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, lres - 1);
        int x1 = std::min(x0 + 1, lres - 1);
        float fx = std::clamp(x - x0, 0.f, 1.f);
        for (int k = 0; k < lres; ++k) {
            g.lut_scale_rows.push_back(lut.first.at(x0, k, 0) +
                                       (lut.first.at(x1, k, 0) - lut.first.at(x0, k, 0)) * fx);
            g.lut_bias_rows.push_back(lut.second.at(x0, k, 0) +
                                      (lut.second.at(x1, k, 0) - lut.second.at(x0, k, 0)) * fx);
        }
        g.nov.push_back(nov);
        g.pixels.push_back(pixels[p]);
        ++g.count;
    }
    return g;
}

DiffRenderGeom build_pixel_geom(const Image& normal, const Image& view, const Image& mask,
                                int env_res) {
    require(normal.channels == 3, "render geometry: normal map must have 3 channels");
    require(view.data.empty() || (view.width == normal.width && view.height == normal.height &&
                                  view.channels == 3),
            "render geometry: view map must match the normal map");
    require(mask.width == normal.width && mask.height == normal.height,
            "render geometry: mask must match the normal map");
    std::vector<Vec3> ns, vs;
    std::vector<int> px;
    for (int y = 0; y < normal.height; ++y)
        for (int x = 0; x < normal.width; ++x) {
            if (mask.at(x, y, 0) <= 0.5f) continue;
            Vec3 n = normal.pixel(x, y);
            if (length(n) < 1e-6f) continue;
            ns.push_back(n);
            vs.push_back(view.data.empty() ? Vec3{0.f, 0.f, 1.f} : view.pixel(x, y));
            px.push_back(y * normal.width + x);
        }
    return build_geom_from_dirs(ns, vs, px, env_res);
}

const EnvOperators& env_operators(int res) {
    static std::mutex mu;
    static std::map<int, EnvOperators> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(res);
    if (it != cache.end()) return it->second;

    require(res >= 4 && res <= 16 && (res & (res - 1)) == 0,
            "environment operators: resolution must be a power of two in [4, 16], got " +
                std::to_string(res));
    EnvOperators ops;
    ops.res = res;
    ops.mip_res = prefiltered_mip_res(res);
    ops.irr_res = std::min(res, EnvironmentMap::kIrradianceRes);
    TexelGrid src = texel_grid(res);
    for (int m = 1; m < kMips; ++m) {
        float rough = static_cast<float>(m) / (kMips - 1);
        float alpha = std::max(rough, kRoughnessFloor);
        alpha *= alpha;
        ops.filter[m] = filter_matrix(ops.mip_res[m], src, alpha);
    }
    ops.cosine = filter_matrix(ops.irr_res, src, 0.f);
    return cache.emplace(res, std::move(ops)).first->second;
}

EnvFeatures env_features(TapeD& tape, const EnvOperators& ops, const TensorD& env_logits) {
    require(env_logits->ndim() == 2 && env_logits->shape[0] == 6 * ops.res * ops.res &&
                env_logits->shape[1] == 3,
            "environment features: logits must be (6*res², 3), got " +
                shape_str(env_logits->shape));
    EnvFeatures f;
    TensorD radiance = softplus(tape, env_logits);
    f.mips[0] = radiance;
    for (int m = 1; m < kMips; ++m) f.mips[m] = matmul(tape, ops.filter[m], radiance);
    f.irr = matmul(tape, ops.cosine, radiance);
    return f;
}

EnvFeatures env_features(const EnvironmentMap& env) {
    require(env.prefiltered_ready() && !env.irradiance.empty(),
            "environment features: map must be prefiltered");
    EnvFeatures f;
    for (int m = 0; m < kMips; ++m) f.mips[m] = faces_tensor(env.prefiltered[m]);
    f.irr = faces_tensor(env.irradiance);
    return f;
}

TensorD render_pixels(TapeD& tape, const DiffRenderGeom& geom, const EnvFeatures& env,
                      const TensorD& albedo, const TensorD& roughness, const TensorD& metallic) {
    const int p = geom.count;
    require(p > 0, "render: geometry has no shaded pixels");
    require(albedo->shape == Shape{p, 3}, "render: albedo must be (count, 3), got " +
                                              shape_str(albedo->shape));
    require(roughness->shape == Shape{p, 1} && metallic->shape == Shape{p, 1},
            "render: roughness/metallic must be (count, 1)");
    const Shape wide{p, 3};

    // prefiltered lookup: tent-blend the per-mip bilinear fetches over the
    // roughness-scaled mip coordinate
    TensorD c = affine(tape, roughness, static_cast<double>(kMips - 1), 0.0);
    TensorD pref;
    for (int m = 0; m < kMips; ++m) {
        TensorD feat =
            gather_weighted(tape, env.mips[m], geom.mip_taps[m].idx, geom.mip_taps[m].w, 4);
        TensorD d = affine(tape, c, 1.0, -static_cast<double>(m));
        TensorD ad = add(tape, relu(tape, d), relu(tape, affine(tape, d, -1.0, 0.0)));
        TensorD hat = relu(tape, affine(tape, ad, -1.0, 1.0));
        TensorD term = mul(tape, feat, broadcast_to(tape, hat, wide));
        pref = pref ? add(tape, pref, term) : term;
    }

    TensorD scale = interp_rows(tape, geom.lut_scale_rows, EnvironmentMap::kLutRes, roughness,
                                static_cast<double>(EnvironmentMap::kLutRes), -0.5);
    TensorD bias = interp_rows(tape, geom.lut_bias_rows, EnvironmentMap::kLutRes, roughness,
                               static_cast<double>(EnvironmentMap::kLutRes), -0.5);
    // f0 = 0.04 + metallic * (albedo - 0.04)
    TensorD f0 = affine(tape,
                        mul(tape, broadcast_to(tape, metallic, wide),
                            affine(tape, albedo, 1.0, -0.04)),
                        1.0, 0.04);
    TensorD spec = mul(tape, pref,
                       add(tape, mul(tape, f0, broadcast_to(tape, scale, wide)),
                           broadcast_to(tape, bias, wide)));

    TensorD irr = gather_weighted(tape, env.irr, geom.irr_taps.idx, geom.irr_taps.w, 4);
    TensorD kd = broadcast_to(tape, affine(tape, metallic, -1.0, 1.0), wide);
    TensorD diffuse = mul(tape, mul(tape, albedo, kd), irr);
    return add(tape, diffuse, spec);
}

TensorD tonemap_t(TapeD& tape, const TensorD& x) {
    auto out = make_tensor<double>(x->shape, tensor_detail::wants_grad(x));
    for (int64_t i = 0; i < x->size(); ++i) {
        double v = x->value[i];
        double c = std::clamp(v, 0.0, 1.0);
        out->value[i] = c >= 1.0 ? 1.0
                        : c <= 0.0031308 ? 12.92 * c
                                         : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
    }
    if (out->requires_grad)
        tape.record([x, out] {
            x->ensure_grad();
            for (int64_t i = 0; i < x->size(); ++i) {
                double v = x->value[i];
                double d = 0.0;
                if (v > 0.0 && v < 1.0)
                    d = v <= 0.0031308 ? 12.92
                                       : (1.055 / 2.4) * std::pow(v, 1.0 / 2.4 - 1.0);
                x->grad[i] += out->grad[i] * d;
            }
        });
    return out;
}

} // namespace irid
