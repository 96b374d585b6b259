#pragma once

#include <cmath>

#include "irid/math/rng.hpp"
#include "irid/math/vec3.hpp"

namespace irid {

constexpr float kRoughnessFloor = 0.04f;  // keeps the GGX lobe and its gradients finite

// Basecolor-metallic material sample. Albedo is linear RGB.
struct BrdfParams {
    Vec3 albedo{0.5f, 0.5f, 0.5f};
    float roughness = 0.5f;
    float metallic = 0.f;

    float alpha() const {
        float r = std::max(roughness, kRoughnessFloor);
        return r * r;
    }
    Vec3 f0() const { return Vec3(0.04f) * (1.f - metallic) + albedo * metallic; }
};

// GGX/Trowbridge-Reitz normal distribution.
inline float ggx_d(float noh, float alpha) {
    float a2 = alpha * alpha;
    float d = noh * noh * (a2 - 1.f) + 1.f;
    return a2 / (kPi * d * d);
}

inline float smith_lambda(float cos_theta, float alpha) {
    float c = std::clamp(cos_theta, 1e-6f, 1.f);
    float a2 = alpha * alpha;
    float tan2 = (1.f - c * c) / (c * c);
    return 0.5f * (std::sqrt(1.f + a2 * tan2) - 1.f);
}

// Height-correlated Smith masking-shadowing.
inline float smith_g(float nov, float nol, float alpha) {
    return 1.f / (1.f + smith_lambda(nov, alpha) + smith_lambda(nol, alpha));
}

inline Vec3 fresnel_schlick(const Vec3& f0, float hov) {
    float f = std::pow(std::clamp(1.f - hov, 0.f, 1.f), 5.f);
    return f0 + (Vec3(1.f) - f0) * f;
}

// Full BRDF value: Lambertian diffuse scaled by (1-metallic) plus
// Cook-Torrance GGX specular. Zero below the horizon.
inline Vec3 eval_brdf(const BrdfParams& p, const Vec3& n, const Vec3& v, const Vec3& l) {
    float nov = dot(n, v), nol = dot(n, l);
    if (nov <= 0.f || nol <= 0.f) return Vec3(0.f);
    Vec3 h = normalize(v + l);
    float noh = std::clamp(dot(n, h), 0.f, 1.f);
    float hov = std::clamp(dot(h, v), 0.f, 1.f);
    float alpha = p.alpha();
    float d = ggx_d(noh, alpha);
    float g = smith_g(nov, nol, alpha);
    Vec3 f = fresnel_schlick(p.f0(), hov);
    Vec3 diffuse = p.albedo * ((1.f - p.metallic) * kInvPi);
    Vec3 specular = f * (d * g / (4.f * nov * nol));
    return diffuse + specular;
}

// Cosine-weighted hemisphere direction around unit n; pdf = (n.l)/pi.
inline Vec3 sample_cosine(const Vec3& n, float u1, float u2) {
    float r = std::sqrt(u1);
    float phi = kTwoPi * u2;
    float z = std::sqrt(std::max(0.f, 1.f - u1));
    Vec3 t, b;
    orthonormal_basis(n, t, b);
    return t * (r * std::cos(phi)) + b * (r * std::sin(phi)) + n * z;
}

inline float pdf_cosine(const Vec3& n, const Vec3& l) {
    return std::max(0.f, dot(n, l)) * kInvPi;
}

// Sample a half-vector h from the GGX distribution D(h)|n.h| around n.
inline Vec3 sample_ggx_h(const Vec3& n, float alpha, float u1, float u2) {
    float a2 = alpha * alpha;
    float cos_t = std::sqrt(std::max(0.f, (1.f - u1) / (1.f + (a2 - 1.f) * u1)));
    float sin_t = std::sqrt(std::max(0.f, 1.f - cos_t * cos_t));
    float phi = kTwoPi * u2;
    Vec3 t, b;
    orthonormal_basis(n, t, b);
    return t * (sin_t * std::cos(phi)) + b * (sin_t * std::sin(phi)) + n * cos_t;
}

// pdf of the reflected direction l under GGX half-vector sampling given v.
inline float pdf_ggx_reflect(const Vec3& n, const Vec3& v, const Vec3& l, float alpha) {
    Vec3 h = normalize(v + l);
    float noh = dot(n, h);
    float hov = dot(h, v);
    if (noh <= 0.f || hov <= 0.f) return 0.f;
    return ggx_d(noh, alpha) * noh / (4.f * hov);
}

} // namespace irid
