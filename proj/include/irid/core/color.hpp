#pragma once

#include <cmath>

#include "irid/core/error.hpp"
#include "irid/math/vec3.hpp"

namespace irid {

inline float srgb_encode(float x) {
    return x <= 0.0031308f ? 12.92f * x : 1.055f * std::pow(x, 1.f / 2.4f) - 0.055f;
}

inline float srgb_decode(float x) {
    return x <= 0.04045f ? x / 12.92f : std::pow((x + 0.055f) / 1.055f, 2.4f);
}

// HDR radiance -> display value in [0,1]: clamp then sRGB transfer.
inline float tonemap(float hdr) {
    if (std::isnan(hdr)) raise("tonemap: NaN input");
    float x = std::clamp(hdr, 0.f, 1.f);
    return x == 1.f ? 1.f : srgb_encode(x);  // keep the top end exact in float
}

inline Vec3 tonemap(const Vec3& hdr) {
    return {tonemap(hdr.x), tonemap(hdr.y), tonemap(hdr.z)};
}

// Unit camera-space normal -> storable rgb via (n+1)/2.
inline Vec3 encode_normal(const Vec3& n) {
    float len = length(n);
    if (std::fabs(len - 1.f) > 1e-4f) raise("encode_normal: input not unit length");
    return (n + Vec3(1.f)) * 0.5f;
}

inline Vec3 decode_normal(const Vec3& rgb) { return rgb * 2.f - Vec3(1.f); }

} // namespace irid
