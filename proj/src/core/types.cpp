#include "irid/core/types.hpp"

namespace irid {

void Camera::validate() const {
    require(vfov_rad > 0.f && vfov_rad < kPi, "camera: vertical fov out of (0, pi)");
    require(width > 0 && height > 0, "camera: non-positive resolution");
    Vec3 f = look_at - position;
    require(length(f) > 0.f, "camera: look_at equals position");
    require(length(cross(normalize(f), normalize(up))) > 1e-6f,
            "camera: view direction parallel to up");
}

void IntrinsicSet::validate() const {
    require(!albedo.empty() && albedo.channels == 3, "intrinsics: bad albedo map");
    require_shape(albedo, normal, "intrinsics");
    require(roughness.width == albedo.width && roughness.height == albedo.height &&
                roughness.channels == 1, "intrinsics: bad roughness map");
    require(metallic.width == albedo.width && metallic.height == albedo.height &&
                metallic.channels == 1, "intrinsics: bad metallic map");
    require(mask.width == albedo.width && mask.height == albedo.height && mask.channels == 1,
            "intrinsics: bad mask map");
    for (float v : albedo.data) require(v >= 0.f && v <= 1.f, "intrinsics: albedo out of [0,1]");
    for (float v : roughness.data) require(v >= 0.f && v <= 1.f, "intrinsics: roughness out of [0,1]");
    for (float v : metallic.data) require(v >= 0.f && v <= 1.f, "intrinsics: metallic out of [0,1]");
    for (int y = 0; y < albedo.height; ++y)
        for (int x = 0; x < albedo.width; ++x)
            if (foreground(x, y))
                require(std::fabs(length(normal.pixel(x, y)) - 1.f) <= 1e-4f,
                        "intrinsics: non-unit foreground normal");
}

std::array<Triplet, 3> to_triplets(const IntrinsicSet& s) {
    int w = s.width(), h = s.height();
    Triplet a{TripletKind::Albedo, s.albedo};
    Triplet n{TripletKind::Normal, Image(w, h, 3, 1.f)};
    Triplet mr{TripletKind::MetallicRoughness, Image(w, h, 3, 0.f)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (s.foreground(x, y)) {
                n.data.set_pixel(x, y, (s.normal.pixel(x, y) + Vec3(1.f)) * 0.5f);
                mr.data.set_pixel(x, y, {s.metallic.at(x, y, 0), s.roughness.at(x, y, 0), 0.f});
            } else {
                mr.data.set_pixel(x, y, {1.f, 1.f, 0.f});  // white except the spare channel
            }
        }
    }
    return {a, n, mr};
}

IntrinsicSet from_triplets(const std::array<Triplet, 3>& t) {
    const Image* a = nullptr;
    const Image* n = nullptr;
    const Image* mr = nullptr;
    for (const Triplet& tr : t) {
        switch (tr.kind) {
            case TripletKind::Albedo: a = &tr.data; break;
            case TripletKind::Normal: n = &tr.data; break;
            case TripletKind::MetallicRoughness: mr = &tr.data; break;
        }
    }
    require(a && n && mr, "from_triplets: three distinct kinds required");
    require_shape(*a, *n, "from_triplets");
    require_shape(*a, *mr, "from_triplets");

    int w = a->width, h = a->height;
    IntrinsicSet s;
    s.albedo = *a;
    for (float& v : s.albedo.data) v = std::clamp(v, 0.f, 1.f);
    s.normal = Image(w, h, 3);
    s.roughness = Image(w, h, 1);
    s.metallic = Image(w, h, 1);
    s.mask = Image(w, h, 1, 1.f);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Vec3 d = decode_normal(clamp(n->pixel(x, y), 0.f, 1.f));
            float len = length(d);
            s.normal.set_pixel(x, y, len > 1e-6f ? d / len : Vec3(0.f));
            Vec3 m = clamp(mr->pixel(x, y), 0.f, 1.f);
            s.metallic.at(x, y, 0) = m.x;
            s.roughness.at(x, y, 0) = m.y;
        }
    }
    return s;
}

void MultiViewBatch::validate() const {
    require(!images.empty(), "batch: needs at least one image");
    require(view_ids.size() == images.size() && light_ids.size() == images.size(),
            "batch: id lists must match image count");
    for (const Image& im : images) {
        require(im.channels == 3, "batch: images must be RGB");
        require_shape(im, images[0], "batch");
    }
}

} // namespace irid
