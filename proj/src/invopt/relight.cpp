#include "irid/invopt/relight.hpp"

#include "irid/core/error.hpp"
#include "irid/render/brdf.hpp"
#include "irid/render/integrators.hpp"

namespace irid {

Image relight_hdr(const IntrinsicSet& s, const EnvironmentMap& env, const Image& view_dirs) {
    require(env.prefiltered_ready(), "relight: environment not prefiltered");
    require(view_dirs.data.empty() ||
                (view_dirs.width == s.width() && view_dirs.height == s.height() &&
                 view_dirs.channels == 3),
            "relight: view map must match the intrinsic maps");
    Image out(s.width(), s.height(), 3, 0.f);
    for (int y = 0; y < s.height(); ++y)
        for (int x = 0; x < s.width(); ++x) {
            if (!s.foreground(x, y)) continue;
            Vec3 n = s.normal.pixel(x, y);
            if (length(n) < 1e-6f) continue;
            Vec3 v = view_dirs.data.empty() ? Vec3{0.f, 0.f, 1.f} : view_dirs.pixel(x, y);
            BrdfParams params{s.albedo.pixel(x, y), s.roughness.at(x, y, 0),
                              s.metallic.at(x, y, 0)};
            out.set_pixel(x, y, render_splitsum(n, v, params, env, {}, Vec3{0.f, 0.f, 0.f}));
        }
    return out;
}

Image relight(const IntrinsicSet& s, const EnvironmentMap& env, const Image& view_dirs) {
    Image hdr = relight_hdr(s, env, view_dirs);
    Image out(hdr.width, hdr.height, 3);
    for (size_t i = 0; i < hdr.data.size(); ++i) out.data[i] = tonemap(hdr.data[i]);
    return out;
}

IntrinsicSet edit_material(const IntrinsicSet& s, const MaterialEdit& edit) {
    require(edit.region.data.empty() ||
                (edit.region.width == s.width() && edit.region.height == s.height() &&
                 edit.region.channels == 1),
            "edit: region mask must be a 1-channel map of the intrinsic resolution");
    auto in_region = [&](int x, int y) {
        return s.foreground(x, y) &&
               (edit.region.data.empty() || edit.region.at(x, y, 0) > 0.5f);
    };
    auto checked = [](float v) {
        require(v >= 0.f && v <= 1.f,
                "edit: value " + std::to_string(v) + " outside the valid range [0, 1]");
        return v;
    };

    IntrinsicSet out = s;
    for (int y = 0; y < s.height(); ++y)
        for (int x = 0; x < s.width(); ++x) {
            if (!in_region(x, y)) continue;
            switch (edit.channel) {
                case MaterialEdit::Channel::Albedo: {
                    Vec3 a = edit.use_scale ? s.albedo.pixel(x, y) * edit.scale : edit.value;
                    out.albedo.set_pixel(x, y, {checked(a.x), checked(a.y), checked(a.z)});
                    break;
                }
                case MaterialEdit::Channel::Roughness:
                    out.roughness.at(x, y, 0) = checked(
                        edit.use_scale ? s.roughness.at(x, y, 0) * edit.scale : edit.value.x);
                    break;
                case MaterialEdit::Channel::Metallic:
                    out.metallic.at(x, y, 0) = checked(
                        edit.use_scale ? s.metallic.at(x, y, 0) * edit.scale : edit.value.x);
                    break;
            }
        }
    return out;
}

} // namespace irid
