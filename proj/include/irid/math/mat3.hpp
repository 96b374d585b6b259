#pragma once

#include "irid/math/vec3.hpp"

namespace irid {

// Row-major 3x3 matrix; only what the scene transforms need.
struct Mat3 {
    Vec3 r0{1.f, 0.f, 0.f}, r1{0.f, 1.f, 0.f}, r2{0.f, 0.f, 1.f};

    Vec3 operator*(const Vec3& v) const { return {dot(r0, v), dot(r1, v), dot(r2, v)}; }

    Mat3 transposed() const {
        return {{r0.x, r1.x, r2.x}, {r0.y, r1.y, r2.y}, {r0.z, r1.z, r2.z}};
    }

    static Mat3 rotation(const Vec3& axis_unit, float angle) {
        const Vec3& u = axis_unit;
        float c = std::cos(angle), s = std::sin(angle), t = 1.f - c;
        return {{c + u.x * u.x * t, u.x * u.y * t - u.z * s, u.x * u.z * t + u.y * s},
                {u.y * u.x * t + u.z * s, c + u.y * u.y * t, u.y * u.z * t - u.x * s},
                {u.z * u.x * t - u.y * s, u.z * u.y * t + u.x * s, c + u.z * u.z * t}};
    }
};

} // namespace irid
