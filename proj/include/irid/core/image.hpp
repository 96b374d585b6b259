#pragma once

#include <vector>

#include "irid/core/error.hpp"
#include "irid/math/vec3.hpp"

namespace irid {

// Row-major interleaved float image. Channels is 1 (mask/scalar maps) or 3.
struct Image {
    int width = 0, height = 0, channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c, float fill = 0.f)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    bool empty() const { return data.empty(); }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }

    float& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    float at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    Vec3 pixel(int x, int y) const {
        size_t i = (static_cast<size_t>(y) * width + x) * channels;
        if (channels == 1) return Vec3(data[i]);
        return {data[i], data[i + 1], data[i + 2]};
    }
    void set_pixel(int x, int y, const Vec3& v) {
        size_t i = (static_cast<size_t>(y) * width + x) * channels;
        if (channels == 1) { data[i] = v.x; return; }
        data[i] = v.x; data[i + 1] = v.y; data[i + 2] = v.z;
    }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

inline void require_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b))
        raise(std::string(what) + ": image shape mismatch");
}

} // namespace irid
