#include "irid/render/scene_render.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace irid {

ViewRender render_view(const SdfScene& scene, const Camera& camera,
                       const LightingCondition& lighting, int spp, uint64_t seed, int threads) {
    camera.validate();
    int w = camera.width, h = camera.height;

    ViewRender out;
    out.hdr = Image(w, h, 3, 1.f);
    IntrinsicSet& s = out.intrinsics;
    s.albedo = Image(w, h, 3, 1.f);
    s.normal = Image(w, h, 3, 1.f);
    s.roughness = Image(w, h, 1, 1.f);
    s.metallic = Image(w, h, 1, 1.f);
    s.mask = Image(w, h, 1, 0.f);

    float r_scene = scene.bounding_radius();
    float eps = std::max(1e-4f, 5e-4f * r_scene);
    float max_t = length(camera.position) + 4.f * r_scene;
    EnvSource env = lighting.env_source();
    Occluder occluder = [&scene](const Vec3& p, const Vec3& d, float dist) {
        return scene.occluded(p, d, dist);
    };

#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif
#pragma omp parallel for schedule(dynamic, 4)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Ray ray = camera.pixel_ray(x, y);
            float t = scene.trace(ray.origin, ray.dir, max_t, eps);
            if (t < 0.f) continue;  // miss keeps the white background

            Vec3 p = ray.origin + ray.dir * t;
            Vec3 n = normalize(scene.sdf_gradient(p));
            // Step back onto the outside of the eps-isosurface for shading.
            Vec3 p_sh = p + n * eps;

            BrdfParams mat;
            scene.material_at(p, mat.albedo, mat.roughness, mat.metallic);

            Vec3 view = -ray.dir;
            Pcg32 rng(seed, mix64(static_cast<uint64_t>(y) * w + x));
            Vec3 radiance = render_mc(p_sh, n, view, mat, env, lighting.lights, spp, rng,
                                      occluder);

            out.hdr.set_pixel(x, y, radiance);
            s.mask.at(x, y, 0) = 1.f;
            s.albedo.set_pixel(x, y, mat.albedo);
            s.normal.set_pixel(x, y, camera.to_camera_dir(n));
            s.roughness.at(x, y, 0) = mat.roughness;
            s.metallic.at(x, y, 0) = mat.metallic;
        }
    }
    return out;
}

} // namespace irid
