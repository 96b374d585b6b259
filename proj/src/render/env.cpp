#include "irid/render/env.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "irid/core/error.hpp"
#include "irid/core/io.hpp"
#include "irid/render/brdf.hpp"

namespace irid {

int dir_to_face(const Vec3& d, float& u, float& v) {
    Vec3 a = abs(d);
    int face;
    float uc, vc, ma;
    if (a.x >= a.y && a.x >= a.z) {
        ma = a.x;
        if (d.x > 0) { face = 0; uc = -d.z; vc = -d.y; }
        else         { face = 1; uc =  d.z; vc = -d.y; }
    } else if (a.y >= a.z) {
        ma = a.y;
        if (d.y > 0) { face = 2; uc =  d.x; vc =  d.z; }
        else         { face = 3; uc =  d.x; vc = -d.z; }
    } else {
        ma = a.z;
        if (d.z > 0) { face = 4; uc =  d.x; vc = -d.y; }
        else         { face = 5; uc = -d.x; vc = -d.y; }
    }
    u = 0.5f * (uc / ma + 1.f);
    v = 0.5f * (vc / ma + 1.f);
    return face;
}

Vec3 face_uv_to_dir(int face, float u, float v) {
    float uc = 2.f * u - 1.f, vc = 2.f * v - 1.f;
    switch (face) {
        case 0: return {1.f, -vc, -uc};
        case 1: return {-1.f, -vc, uc};
        case 2: return {uc, 1.f, vc};
        case 3: return {uc, -1.f, -vc};
        case 4: return {uc, -vc, 1.f};
        default: return {-uc, -vc, -1.f};
    }
}

float texel_solid_angle(int i, int j, int res) {
    float u = 2.f * (i + 0.5f) / res - 1.f;
    float v = 2.f * (j + 0.5f) / res - 1.f;
    float r2 = 1.f + u * u + v * v;
    return 4.f / (res * static_cast<float>(res) * r2 * std::sqrt(r2));
}

namespace {

Vec3 bilinear_face(const Image& img, float u, float v) {
    int res = img.width;
    float x = u * res - 0.5f, y = v * res - 0.5f;
    int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, res - 1);
    int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, res - 1);
    int x1 = std::min(x0 + 1, res - 1);
    int y1 = std::min(y0 + 1, res - 1);
    float fx = std::clamp(x - x0, 0.f, 1.f);
    float fy = std::clamp(y - y0, 0.f, 1.f);
    Vec3 a = lerp(img.pixel(x0, y0), img.pixel(x1, y0), fx);
    Vec3 b = lerp(img.pixel(x0, y1), img.pixel(x1, y1), fx);
    return lerp(a, b, fy);
}

Vec3 sample_faces(const std::vector<Image>& faces, const Vec3& dir) {
    float u, v;
    int f = dir_to_face(dir, u, v);
    return bilinear_face(faces[f], u, v);
}

std::vector<Image> downsample_faces(const std::vector<Image>& faces, int target) {
    std::vector<Image> cur = faces;
    while (cur[0].width > target) {
        int res = cur[0].width / 2;
        std::vector<Image> next(6, Image(res, res, 3));
        for (int f = 0; f < 6; ++f)
            for (int y = 0; y < res; ++y)
                for (int x = 0; x < res; ++x) {
                    Vec3 s = cur[f].pixel(2 * x, 2 * y) + cur[f].pixel(2 * x + 1, 2 * y) +
                             cur[f].pixel(2 * x, 2 * y + 1) + cur[f].pixel(2 * x + 1, 2 * y + 1);
                    next[f].set_pixel(x, y, s * 0.25f);
                }
        cur = std::move(next);
    }
    return cur;
}

// Normalized GGX-weighted convolution of the source faces, evaluated with the
// usual n = v = reflection-direction assumption.
std::vector<Image> convolve_ggx(const std::vector<Image>& src, int out_res, float roughness) {
    int sres = src[0].width;
    float alpha = std::max(roughness, kRoughnessFloor);
    alpha *= alpha;

    struct SrcTexel { Vec3 dir; Vec3 radiance; float domega; };
    std::vector<SrcTexel> texels;
    texels.reserve(static_cast<size_t>(6) * sres * sres);
    for (int f = 0; f < 6; ++f)
        for (int j = 0; j < sres; ++j)
            for (int i = 0; i < sres; ++i)
                texels.push_back({normalize(face_uv_to_dir(f, (i + 0.5f) / sres, (j + 0.5f) / sres)),
                                  src[f].pixel(i, j), texel_solid_angle(i, j, sres)});

    std::vector<Image> out(6, Image(out_res, out_res, 3));
    for (int f = 0; f < 6; ++f) {
#pragma omp parallel for schedule(dynamic)
        for (int j = 0; j < out_res; ++j)
            for (int i = 0; i < out_res; ++i) {
                Vec3 n = normalize(face_uv_to_dir(f, (i + 0.5f) / out_res, (j + 0.5f) / out_res));
                Vec3 acc(0.f);
                float wsum = 0.f;
                for (const SrcTexel& t : texels) {
                    float nol = dot(n, t.dir);
                    if (nol <= 0.f) continue;
                    Vec3 h = normalize(n + t.dir);
                    float w = ggx_d(std::clamp(dot(n, h), 0.f, 1.f), alpha) * nol * t.domega;
                    acc += t.radiance * w;
                    wsum += w;
                }
                out[f].set_pixel(i, j, wsum > 0.f ? acc / wsum : Vec3(0.f));
            }
    }
    return out;
}

std::vector<Image> convolve_cosine(const std::vector<Image>& src, int out_res) {
    int sres = src[0].width;
    struct SrcTexel { Vec3 dir; Vec3 radiance; float domega; };
    std::vector<SrcTexel> texels;
    texels.reserve(static_cast<size_t>(6) * sres * sres);
    for (int f = 0; f < 6; ++f)
        for (int j = 0; j < sres; ++j)
            for (int i = 0; i < sres; ++i)
                texels.push_back({normalize(face_uv_to_dir(f, (i + 0.5f) / sres, (j + 0.5f) / sres)),
                                  src[f].pixel(i, j), texel_solid_angle(i, j, sres)});

    std::vector<Image> out(6, Image(out_res, out_res, 3));
    for (int f = 0; f < 6; ++f) {
#pragma omp parallel for schedule(dynamic)
        for (int j = 0; j < out_res; ++j)
            for (int i = 0; i < out_res; ++i) {
                Vec3 n = normalize(face_uv_to_dir(f, (i + 0.5f) / out_res, (j + 0.5f) / out_res));
                Vec3 acc(0.f);
                float wsum = 0.f;
                for (const SrcTexel& t : texels) {
                    float nol = dot(n, t.dir);
                    if (nol <= 0.f) continue;
                    float w = nol * t.domega;
                    acc += t.radiance * w;
                    wsum += w;
                }
                out[f].set_pixel(i, j, wsum > 0.f ? acc / wsum : Vec3(0.f));
            }
    }
    return out;
}

float radical_inverse_vdc(uint32_t bits) {
    bits = (bits << 16u) | (bits >> 16u);
    bits = ((bits & 0x55555555u) << 1u) | ((bits & 0xAAAAAAAAu) >> 1u);
    bits = ((bits & 0x33333333u) << 2u) | ((bits & 0xCCCCCCCCu) >> 2u);
    bits = ((bits & 0x0F0F0F0Fu) << 4u) | ((bits & 0xF0F0F0F0u) >> 4u);
    bits = ((bits & 0x00FF00FFu) << 8u) | ((bits & 0xFF00FF00u) >> 8u);
    return static_cast<float>(bits) * 2.3283064365386963e-10f;
}

} // namespace

Vec3 EnvironmentMap::eval(const Vec3& dir) const { return sample_faces(faces, dir); }

Vec3 EnvironmentMap::sample_prefiltered(const Vec3& dir, float roughness) const {
    require(prefiltered_ready(), "environment map: prefiltered chain not built");
    float c = std::clamp(roughness, 0.f, 1.f) * (kMipCount - 1);
    int m0 = std::min(static_cast<int>(c), kMipCount - 2);
    float f = c - m0;
    Vec3 a = sample_faces(prefiltered[m0], dir);
    Vec3 b = sample_faces(prefiltered[m0 + 1], dir);
    return lerp(a, b, f);
}

Vec3 EnvironmentMap::irradiance_at(const Vec3& n) const {
    require(!irradiance.empty(), "environment map: irradiance not built");
    return sample_faces(irradiance, n);
}

void EnvironmentMap::lut(float nov, float roughness, float& scale, float& bias) const {
    require(!lut_scale.empty(), "environment map: brdf table not built");
    int res = lut_scale.width;
    float x = std::clamp(nov, 0.f, 1.f) * res - 0.5f;
    float y = std::clamp(roughness, 0.f, 1.f) * res - 0.5f;
    int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, res - 1);
    int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, res - 1);
    int x1 = std::min(x0 + 1, res - 1);
    int y1 = std::min(y0 + 1, res - 1);
    float fx = std::clamp(x - x0, 0.f, 1.f);
    float fy = std::clamp(y - y0, 0.f, 1.f);
    auto bilerp = [&](const Image& img) {
        float a = img.at(x0, y0, 0) + (img.at(x1, y0, 0) - img.at(x0, y0, 0)) * fx;
        float b = img.at(x0, y1, 0) + (img.at(x1, y1, 0) - img.at(x0, y1, 0)) * fx;
        return a + (b - a) * fy;
    };
    scale = bilerp(lut_scale);
    bias = bilerp(lut_bias);
}

EnvironmentMap make_constant_env(const Vec3& radiance, int resolution) {
    EnvironmentMap env;
    env.resolution = resolution;
    env.faces.assign(6, Image(resolution, resolution, 3));
    for (Image& f : env.faces)
        for (int y = 0; y < resolution; ++y)
            for (int x = 0; x < resolution; ++x) f.set_pixel(x, y, radiance);
    return env;
}

void build_brdf_lut(Image& scale, Image& bias, int res, int samples) {
    scale = Image(res, res, 1);
    bias = Image(res, res, 1);
    const Vec3 n{0.f, 0.f, 1.f};
#pragma omp parallel for schedule(dynamic)
    for (int j = 0; j < res; ++j) {
        float rough = (j + 0.5f) / res;
        float alpha = std::max(rough, kRoughnessFloor);
        alpha *= alpha;
        for (int i = 0; i < res; ++i) {
            float nov = std::max((i + 0.5f) / res, 1e-3f);
            Vec3 v{std::sqrt(1.f - nov * nov), 0.f, nov};
            float a = 0.f, b = 0.f;
            for (int k = 0; k < samples; ++k) {
                float u1 = (k + 0.5f) / samples;
                float u2 = radical_inverse_vdc(static_cast<uint32_t>(k));
                Vec3 h = sample_ggx_h(n, alpha, u1, u2);
                Vec3 l = 2.f * dot(v, h) * h - v;
                if (l.z <= 0.f) continue;
                float nol = l.z;
                float noh = std::clamp(h.z, 0.f, 1.f);
                float voh = std::clamp(dot(v, h), 0.f, 1.f);
                if (noh <= 0.f || voh <= 0.f) continue;
                float g = smith_g(nov, nol, alpha);
                float g_vis = g * voh / (noh * nov);
                float fc = std::pow(1.f - voh, 5.f);
                a += (1.f - fc) * g_vis;
                b += fc * g_vis;
            }
            a /= samples;
            b /= samples;
            // The exact single-scatter integral never exceeds 1; project the
            // sampling estimate back onto that bound.
            if (a + b > 1.f) {
                float inv = 1.f / (a + b);
                a *= inv;
                b *= inv;
            }
            scale.at(i, j, 0) = a;
            bias.at(i, j, 0) = b;
        }
    }
}

namespace {

// The table depends only on the BRDF, so share it across environments.
void cached_brdf_lut(Image& scale, Image& bias, int res, int samples) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::pair<Image, Image>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(res, samples);
    auto it = cache.find(key);
    if (it == cache.end()) {
        Image s, b;
        build_brdf_lut(s, b, res, samples);
        it = cache.emplace(key, std::make_pair(std::move(s), std::move(b))).first;
    }
    scale = it->second.first;
    bias = it->second.second;
}

} // namespace

void prefilter_env(EnvironmentMap& env) {
    require(!env.faces.empty() && env.faces[0].width == env.resolution,
            "prefilter_env: faces not loaded");
    require((env.resolution & (env.resolution - 1)) == 0,
            "prefilter_env: resolution must be a power of two");

    env.prefiltered.assign(EnvironmentMap::kMipCount, {});
    env.prefiltered[0] = env.faces;  // roughness 0 level is the identity
    for (int m = 1; m < EnvironmentMap::kMipCount; ++m) {
        int out_res = std::max(env.resolution >> m, 4);
        int src_res = std::min(env.resolution, std::max(out_res * 2, 16));
        float rough = static_cast<float>(m) / (EnvironmentMap::kMipCount - 1);
        env.prefiltered[m] = convolve_ggx(downsample_faces(env.faces, src_res), out_res, rough);
    }

    int irr_src = std::min(env.resolution, 2 * EnvironmentMap::kIrradianceRes);
    env.irradiance = convolve_cosine(downsample_faces(env.faces, irr_src),
                                     std::min(env.resolution, EnvironmentMap::kIrradianceRes));

    cached_brdf_lut(env.lut_scale, env.lut_bias, EnvironmentMap::kLutRes, 1024);
}

// Cross cells as (row, col) in a 4x3 grid; row 0 is the top of the image.
namespace {
constexpr int kCrossRow[6] = {1, 1, 0, 2, 1, 1};
constexpr int kCrossCol[6] = {2, 0, 1, 1, 1, 3};
} // namespace

void save_env_cross(const std::string& path, const EnvironmentMap& env) {
    int r = env.resolution;
    require(!env.faces.empty(), "save_env_cross: faces not loaded");
    Image sheet(4 * r, 3 * r, 3, 0.f);
    for (int f = 0; f < 6; ++f)
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x)
                sheet.set_pixel(kCrossCol[f] * r + x, kCrossRow[f] * r + y,
                                env.faces[f].pixel(x, y));
    save_pfm(path, sheet);
}

EnvironmentMap load_env_cross(const std::string& path) {
    Image sheet = load_pfm(path);
    require(sheet.channels == 3, "load_env_cross: need an RGB PFM");
    require(sheet.width % 4 == 0 && sheet.height % 3 == 0 &&
                sheet.width / 4 == sheet.height / 3,
            "load_env_cross: not a 4x3 horizontal cross");
    int r = sheet.width / 4;
    EnvironmentMap env;
    env.resolution = r;
    env.faces.assign(6, Image(r, r, 3));
    for (int f = 0; f < 6; ++f)
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x)
                env.faces[f].set_pixel(x, y,
                                       sheet.pixel(kCrossCol[f] * r + x, kCrossRow[f] * r + y));
    for (const Image& face : env.faces)
        for (float v : face.data)
            require(std::isfinite(v) && v >= 0.f, "load_env_cross: negative or non-finite radiance");
    return env;
}

} // namespace irid
