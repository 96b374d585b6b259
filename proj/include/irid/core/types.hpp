#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "irid/core/color.hpp"
#include "irid/core/image.hpp"
#include "irid/math/vec3.hpp"

namespace irid {

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit
};

// Pinhole camera. Camera space is right-handed with x=right, y=up, z=-forward,
// i.e. the camera looks down its own -z axis.
struct Camera {
    Vec3 position;
    Vec3 look_at;
    Vec3 up{0.f, 1.f, 0.f};
    float vfov_rad = 0.7f;
    int width = 64, height = 64;

    Vec3 forward() const { return normalize(look_at - position); }
    Vec3 right() const { return normalize(cross(forward(), up)); }
    Vec3 up_cam() const { return cross(right(), forward()); }

    void validate() const;

    // Ray through pixel (x,y) with sub-pixel offset (jx,jy) in [0,1); 0.5 is the center.
    Ray pixel_ray(int x, int y, float jx = 0.5f, float jy = 0.5f) const {
        float tan_half = std::tan(vfov_rad * 0.5f);
        float aspect = static_cast<float>(width) / static_cast<float>(height);
        float ndc_x = ((x + jx) / width * 2.f - 1.f) * aspect * tan_half;
        float ndc_y = (1.f - (y + jy) / height * 2.f) * tan_half;
        Vec3 f = forward(), r = right(), u = cross(r, f);
        return {position, normalize(f + ndc_x * r + ndc_y * u)};
    }

    Vec3 to_camera_dir(const Vec3& world_dir) const {
        Vec3 f = forward(), r = right(), u = cross(r, f);
        return {dot(world_dir, r), dot(world_dir, u), -dot(world_dir, f)};
    }
};

// Per-view ground-truth or predicted maps. All maps are linear (no sRGB).
// Normals are unit vectors in camera space on foreground pixels.
// Background pixels carry 1.0 in every map (white convention).
struct IntrinsicSet {
    Image albedo;     // H x W x 3, [0,1]
    Image normal;     // H x W x 3, camera-space unit vectors on foreground
    Image roughness;  // H x W x 1, [0,1]
    Image metallic;   // H x W x 1, [0,1]
    Image mask;       // H x W x 1, 1 = foreground

    int width() const { return albedo.width; }
    int height() const { return albedo.height; }
    bool foreground(int x, int y) const { return mask.at(x, y, 0) > 0.5f; }

    void validate() const;
};

enum class TripletKind : int { Albedo = 0, Normal = 1, MetallicRoughness = 2 };
constexpr int kTripletCount = 3;

// 3-channel packing of one intrinsic component in [0,1] model range.
struct Triplet {
    TripletKind kind = TripletKind::Albedo;
    Image data;  // H x W x 3
};

// Pack a set into the three storable triplets (albedo, encoded normal, [M,R,0]).
std::array<Triplet, 3> to_triplets(const IntrinsicSet& s);

// Inverse of to_triplets for model output: normals are renormalized where
// possible (zero-length stays zero), mask is all-foreground.
IntrinsicSet from_triplets(const std::array<Triplet, 3>& t);

// The unit of diffusion inference: N tone-mapped conditioning images.
struct MultiViewBatch {
    std::vector<Image> images;  // each H x W x 3 in [0,1]
    std::vector<int> view_ids;
    std::vector<int> light_ids;

    int count() const { return static_cast<int>(images.size()); }
    void validate() const;
};

} // namespace irid
